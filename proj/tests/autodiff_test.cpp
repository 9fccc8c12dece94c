#include "attrikit/autodiff.hpp"

#include <cmath>

#include "attrikit/rng.hpp"
#include "attrikit/validate.hpp"
#include "attrikit/zoo.hpp"
#include "test_support.hpp"

namespace {

using attrikit::GradientMode;
using attrikit::kInputId;
using attrikit::ModelGraph;
using attrikit::OpKind;
using attrikit::Rng;
using attrikit::Tensor;

/// input [2] -> dense(identity) -> relu -> dense([1,-1]); the 2x2 net whose
/// backward pass is traceable by hand.
ModelGraph<double> two_layer_relu_net() {
  ModelGraph<double> m;
  m.input_shape = {2};
  auto hidden = attrikit::detail::dense_node<double>("hidden", kInputId, 2, 2);
  hidden.weights["weight"] = Tensor<double>({2, 2}, {1, 0, 0, 1});
  m.nodes.push_back(std::move(hidden));
  m.nodes.push_back(attrikit::detail::simple_node<double>("act", OpKind::relu, {"hidden"}));
  auto out = attrikit::detail::dense_node<double>("out", "act", 2, 1);
  out.weights["weight"] = Tensor<double>({1, 2}, {1, -1});
  m.nodes.push_back(std::move(out));
  m.output_id = "out";
  m.prelogits_id = "out";
  attrikit::validate_model(m);
  return m;
}

TEST(Autodiff, LinearModelGradientIsTheWeightRow) {
  const auto model = attrikit::one_dense_model<double>(Tensor<double>({1, 2}, {2, -1}),
                                                       Tensor<double>::zeros({1}));
  for (double x0 : {-3.0, 0.0, 7.5}) {
    Tensor<double> x({2}, {x0, 4.0});
    const auto g = attrikit::input_gradient(model, x, 0);
    EXPECT_DOUBLE_EQ(g[0], 2.0);
    EXPECT_DOUBLE_EQ(g[1], -1.0);
  }
}

TEST(Autodiff, FiniteDifferenceExactOnLinearModel) {
  const auto model = attrikit::one_dense_model<double>(Tensor<double>({1, 2}, {2, -1}),
                                                       Tensor<double>::zeros({1}));
  Tensor<double> x({2}, {0.3, -0.9});
  for (double h : {1e-2, 1e-4, 1e-6}) {
    const auto fd = attrikit::finite_difference_gradient(model, x, 0, h);
    EXPECT_NEAR(fd[0], 2.0, 1e-9);
    EXPECT_NEAR(fd[1], -1.0, 1e-9);
  }
}

TEST(Autodiff, FiniteDifferenceZeroOnConstantModel) {
  auto weight = Tensor<double>::zeros({1, 3});
  auto bias = Tensor<double>({1}, {5.0});
  const auto model = attrikit::one_dense_model<double>(weight, bias);
  Tensor<double> x({3}, {1, -2, 3});
  const auto fd = attrikit::finite_difference_gradient(model, x, 0, 1e-4);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(fd[i], 0.0);
  const auto g = attrikit::input_gradient(model, x, 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g[i], 0.0);
}

TEST(Autodiff, GuidedHandTrace) {
  const auto model = two_layer_relu_net();
  Tensor<double> x({2}, {2, 1});  // both hidden units active

  const auto plain = attrikit::input_gradient(model, x, 0, GradientMode::plain);
  EXPECT_DOUBLE_EQ(plain[0], 1.0);
  EXPECT_DOUBLE_EQ(plain[1], -1.0);

  const auto guided = attrikit::input_gradient(model, x, 0, GradientMode::guided);
  EXPECT_DOUBLE_EQ(guided[0], 1.0);
  EXPECT_DOUBLE_EQ(guided[1], 0.0);
}

TEST(Autodiff, GuidedEqualsPlainWithoutRelu) {
  Rng rng(89);
  ModelGraph<double> m;
  m.input_shape = {1, 4, 4};
  auto conv = attrikit::detail::conv_node<double>("c", kInputId, 1, 2, 3, 1, 1);
  for (auto& [slot, t] : conv.weights)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, 0.5);
  m.nodes.push_back(std::move(conv));
  m.nodes.push_back(attrikit::detail::simple_node<double>("p", OpKind::avgpool, {"c"}, 2, 2));
  auto head = attrikit::detail::dense_node<double>("head", "p", 8, 2);
  for (auto& [slot, t] : head.weights)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, 0.5);
  m.nodes.push_back(std::move(head));
  m.output_id = "head";
  m.prelogits_id = "head";
  attrikit::validate_model(m);

  Tensor<double> x = Tensor<double>::zeros(m.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  const auto plain = attrikit::input_gradient(m, x, 1, GradientMode::plain);
  const auto guided = attrikit::input_gradient(m, x, 1, GradientMode::guided);
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_EQ(plain[i], guided[i]);
}

TEST(Autodiff, GuidedOutflowIsNonNegative) {
  Rng rng(97);
  for (int trial = 0; trial < 5; ++trial) {
    Rng net_rng = rng.fork(static_cast<std::uint64_t>(trial));
    const auto model = attrikit::make_random_net<double>(net_rng);
    Tensor<double> x = Tensor<double>::zeros(model.input_shape);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = net_rng.uniform(-1.0, 1.0);

    attrikit::BackpropProbe<double> probe;
    attrikit::input_gradient(model, x, 0, GradientMode::guided, &probe);
    EXPECT_FALSE(probe.relu_outflow.empty());
    for (const auto& [id, outflow] : probe.relu_outflow)
      for (std::size_t i = 0; i < outflow.size(); ++i)
        EXPECT_GE(outflow[i], 0.0) << "negative guided outflow at " << id;
  }
}

TEST(Autodiff, MatchesFiniteDifferencesOnSmoothNets) {
  Rng root(20240917);
  const double h = 1e-4;
  for (std::size_t i = 0; i < 6; ++i) {
    Rng rng = root.fork(100 + i);
    const auto model = attrikit::detail::oracle_net<double>(rng, i, false);
    const std::size_t target = rng.uniform_index(attrikit::detail::prelogit_count(model));
    const auto x = attrikit::detail::sample_clean_input(model, rng, target, 10 * h, 0.0);
    const auto g = attrikit::input_gradient(model, x, target);
    const auto fd = attrikit::finite_difference_gradient(model, x, target, h);
    EXPECT_LT(attrikit::detail::relative_difference(g, fd), 1e-6) << "net " << i;
  }
}

/// Rejection-sample an input for a max-pool net: every ReLU pre-activation
/// clears `margin` and every pool window's winner leads by at least `margin`,
/// so central differences stay on one smooth branch.
Tensor<double> sample_away_from_pool_ties(const ModelGraph<double>& model, Rng& rng,
                                          double margin) {
  for (int attempt = 0; attempt < 500; ++attempt) {
    Tensor<double> x = Tensor<double>::zeros(model.input_shape);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    const auto trace = attrikit::forward(model, x);
    bool clean = true;
    for (const auto& node : model.nodes) {
      if (!clean) break;
      const auto value_of = [&](const std::string& id) -> const Tensor<double>& {
        return id == kInputId ? x : trace.output(id);
      };
      if (node.op == OpKind::relu) {
        const auto& pre = value_of(node.inputs[0]);
        for (std::size_t i = 0; i < pre.size() && clean; ++i)
          clean = std::abs(pre[i]) >= margin;
      } else if (node.op == OpKind::maxpool) {
        const auto& in = value_of(node.inputs[0]);
        const std::size_t c = in.extent(0), hh = in.extent(1), ww = in.extent(2);
        const std::size_t oh = (hh - node.window) / node.stride + 1;
        const std::size_t ow = (ww - node.window) / node.stride + 1;
        for (std::size_t ch = 0; ch < c && clean; ++ch)
          for (std::size_t y = 0; y < oh && clean; ++y)
            for (std::size_t xo = 0; xo < ow && clean; ++xo) {
              double top1 = -1e300, top2 = -1e300;
              for (std::size_t dy = 0; dy < node.window; ++dy)
                for (std::size_t dx = 0; dx < node.window; ++dx) {
                  const double v = in.at3(ch, y * node.stride + dy, xo * node.stride + dx);
                  if (v > top1) {
                    top2 = top1;
                    top1 = v;
                  } else if (v > top2) {
                    top2 = v;
                  }
                }
              clean = top1 - top2 >= margin;
            }
      }
    }
    if (clean) return x;
  }
  raise(attrikit::ErrorKind::invalid_argument, "no pool-tie-free input found");
}

TEST(Autodiff, MatchesFiniteDifferencesThroughMaxPool) {
  Rng root(101);
  const double h = 1e-4;
  for (std::size_t i = 0; i < 3; ++i) {
    Rng rng = root.fork(i);
    attrikit::RandomNetOptions options = attrikit::detail::oracle_net_options(i, false);
    options.avgpool_only = false;  // max pooling on purpose
    const auto model = attrikit::make_random_net<double>(rng, options);
    const auto x = sample_away_from_pool_ties(model, rng, 100 * h);
    const auto g = attrikit::input_gradient(model, x, 0);
    const auto fd = attrikit::finite_difference_gradient(model, x, 0, h);
    EXPECT_LT(attrikit::detail::relative_difference(g, fd), 1e-6) << "net " << i;
  }
}

TEST(Autodiff, GradientIsLinearInFinalCombination) {
  Rng rng(103);
  const auto model = attrikit::make_random_net<double>(rng);
  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

  const double a = 1.3, b = -0.8;
  auto combined = model;
  auto& head = combined.nodes[combined.index_of("head")];
  const auto& w = model.node("head").weight("weight");
  const auto& bias = model.node("head").weight("bias");
  const std::size_t fan_in = w.extent(1);
  Tensor<double> mixed_w = Tensor<double>::zeros({1, fan_in});
  for (std::size_t j = 0; j < fan_in; ++j) mixed_w[j] = a * w.at2(0, j) + b * w.at2(1, j);
  head.weights["weight"] = mixed_w;
  head.weights["bias"] = Tensor<double>({1}, {a * bias[0] + b * bias[1]});
  attrikit::validate_model(combined);

  const auto g0 = attrikit::input_gradient(model, x, 0);
  const auto g1 = attrikit::input_gradient(model, x, 1);
  const auto gc = attrikit::input_gradient(combined, x, 0);
  for (std::size_t i = 0; i < gc.size(); ++i)
    EXPECT_NEAR(gc[i], a * g0[i] + b * g1[i], 1e-12);
}

TEST(Autodiff, InvalidTargetRejected) {
  const auto model = attrikit::one_dense_model<double>(Tensor<double>({1, 2}, {2, -1}),
                                                       Tensor<double>::zeros({1}));
  Tensor<double> x({2}, {1, 1});
  EXPECT_KIND(attrikit::input_gradient(model, x, 5), ErrorKind::invalid_target);
  EXPECT_KIND(attrikit::prelogit_value(model, x, 5), ErrorKind::invalid_target);
}

}  // namespace
