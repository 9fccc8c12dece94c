#include "attrikit/tensor.hpp"

#include <cmath>
#include <limits>

#include "test_support.hpp"

namespace {

using attrikit::Tensor;

TEST(Tensor, ConstructionAndShape) {
  Tensor<double> t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.extent(0), 2u);
  EXPECT_EQ(t.extent(1), 3u);
  EXPECT_DOUBLE_EQ(t[0], 1.0);
  EXPECT_DOUBLE_EQ(t[5], 6.0);
}

TEST(Tensor, ShapeDataMismatchRejected) {
  EXPECT_KIND((Tensor<double>({2, 2}, {1, 2, 3})), ErrorKind::shape_mismatch);
}

TEST(Tensor, ZeroExtentRejected) {
  EXPECT_KIND(Tensor<double>::zeros({3, 0}), ErrorKind::shape_mismatch);
}

TEST(Tensor, NonFiniteValuesRejected) {
  const double inf = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_KIND((Tensor<double>({2}, {1.0, inf})), ErrorKind::non_finite);
  EXPECT_KIND((Tensor<double>({2}, {nan, 0.0})), ErrorKind::non_finite);
  EXPECT_KIND(Tensor<double>::full({2}, inf), ErrorKind::non_finite);

  Tensor<double> t = Tensor<double>::zeros({2});
  t[1] = nan;
  EXPECT_FALSE(t.all_finite());
  EXPECT_KIND(t.validate_finite("test"), ErrorKind::non_finite);
}

TEST(Tensor, RowMajorIndexing) {
  // at2/at3 address the flat buffer with the last axis fastest
  Tensor<int> t2({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t2.at2(0, 2), 2);
  EXPECT_EQ(t2.at2(1, 0), 3);

  Tensor<int> t3({2, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_EQ(t3.at3(0, 1, 2), 5);
  EXPECT_EQ(t3.at3(1, 0, 1), 7);
  t3.at3(1, 1, 0) = 42;
  EXPECT_EQ(t3[9], 42);
}

TEST(Tensor, ReshapePreservesData) {
  Tensor<double> t({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor<double> r = t.reshaped({6});
  EXPECT_EQ(r.rank(), 1u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(r[i], t[i]);
  EXPECT_KIND(t.reshaped({4}), ErrorKind::shape_mismatch);
}

TEST(Tensor, CastBetweenScalarTypes) {
  Tensor<double> t({3}, {1.5, -2.25, 3.0});
  const Tensor<float> f = t.cast<float>();
  EXPECT_EQ(f.shape(), t.shape());
  EXPECT_FLOAT_EQ(f[0], 1.5f);
  EXPECT_FLOAT_EQ(f[1], -2.25f);

  // integral target truncates; uint8 masks are a supported instantiation
  Tensor<float> m({2, 2}, {0.0f, 1.0f, 1.0f, 0.0f});
  const Tensor<std::uint8_t> u = m.cast<std::uint8_t>();
  EXPECT_EQ(u[1], 1);
  EXPECT_EQ(u[3], 0);
}

TEST(Tensor, MapAndZip) {
  Tensor<double> a({3}, {1, -2, 3});
  const Tensor<double> doubled = attrikit::map(a, [](double v) { return 2 * v; });
  EXPECT_DOUBLE_EQ(doubled[1], -4.0);

  Tensor<double> b({3}, {10, 20, 30});
  const Tensor<double> s = attrikit::zip(a, b, [](double x, double y) { return x + y; }, "test");
  EXPECT_DOUBLE_EQ(s[2], 33.0);

  Tensor<double> wrong({2}, {1, 2});
  EXPECT_KIND(attrikit::zip(a, wrong, [](double x, double y) { return x + y; }, "test"),
              ErrorKind::shape_mismatch);
}

TEST(Tensor, ElementwiseArithmetic) {
  Tensor<double> a({2, 2}, {1, 2, 3, 4});
  Tensor<double> b({2, 2}, {10, 20, 30, 40});
  EXPECT_DOUBLE_EQ(attrikit::add(a, b)[3], 44.0);
  EXPECT_DOUBLE_EQ(attrikit::sub(b, a)[0], 9.0);
  EXPECT_DOUBLE_EQ(attrikit::hadamard(a, b)[2], 90.0);
  EXPECT_DOUBLE_EQ(attrikit::scale(a, -2.0)[1], -4.0);

  Tensor<double> acc = Tensor<double>::zeros({2, 2});
  attrikit::accumulate(acc, a);
  attrikit::accumulate(acc, a);
  EXPECT_DOUBLE_EQ(acc[3], 8.0);

  Tensor<double> wrong({4}, {1, 2, 3, 4});
  EXPECT_KIND(attrikit::add(a, wrong), ErrorKind::shape_mismatch);
  EXPECT_KIND(attrikit::accumulate(acc, wrong), ErrorKind::shape_mismatch);
}

TEST(Tensor, Reductions) {
  Tensor<double> t({5}, {3, -7, 2, 7, 0});
  EXPECT_DOUBLE_EQ(attrikit::sum(t), 5.0);
  EXPECT_DOUBLE_EQ(attrikit::min_value(t), -7.0);
  EXPECT_DOUBLE_EQ(attrikit::max_value(t), 7.0);
  EXPECT_DOUBLE_EQ(attrikit::max_abs_value(t), 7.0);
}

TEST(Tensor, ArgmaxBreaksTiesTowardLowestIndex) {
  Tensor<double> t({4}, {1, 5, 5, 2});
  EXPECT_EQ(attrikit::argmax(t), 1u);
  Tensor<double> constant = Tensor<double>::full({3}, 9.0);
  EXPECT_EQ(attrikit::argmax(constant), 0u);
}

TEST(Tensor, RequireSameShape) {
  Tensor<double> a = Tensor<double>::zeros({2, 3});
  Tensor<double> b = Tensor<double>::zeros({2, 3});
  EXPECT_NO_THROW(attrikit::require_same_shape(a, b, "ok"));
  Tensor<double> c = Tensor<double>::zeros({3, 2});
  EXPECT_KIND(attrikit::require_same_shape(a, c, "bad"), ErrorKind::shape_mismatch);
}

TEST(Tensor, ShapeToString) {
  const std::vector<std::size_t> shape = {2, 3, 4};
  EXPECT_EQ(attrikit::shape_to_string(shape), "[2,3,4]");
}

}  // namespace
