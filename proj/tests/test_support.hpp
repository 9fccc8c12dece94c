#pragma once

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "attrikit/error.hpp"

/// Assert that `statement` throws attrikit::Error with the given kind.
#define EXPECT_KIND(statement, expected_kind)                                   \
  do {                                                                          \
    bool caught_ = false;                                                       \
    try {                                                                       \
      statement;                                                                \
    } catch (const ::attrikit::Error& e_) {                                     \
      caught_ = true;                                                           \
      EXPECT_EQ(e_.kind(), ::attrikit::expected_kind)                           \
          << "wrong error kind; message: " << e_.what();                        \
    }                                                                           \
    EXPECT_TRUE(caught_) << "expected " #statement " to throw "                 \
                         << ::attrikit::error_kind_name(::attrikit::expected_kind); \
  } while (0)

namespace testsupport {

/// Fresh empty directory under the system temp root, unique per call.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("attrikit_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
