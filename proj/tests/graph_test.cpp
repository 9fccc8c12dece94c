#include "attrikit/graph.hpp"

#include <cmath>

#include "attrikit/rng.hpp"
#include "attrikit/zoo.hpp"
#include "test_support.hpp"

namespace {

using attrikit::kInputId;
using attrikit::LayerNode;
using attrikit::ModelGraph;
using attrikit::OpKind;
using attrikit::Rng;
using attrikit::Tensor;

Tensor<double> random_input(Rng& rng, const std::vector<std::size_t>& shape) {
  Tensor<double> t = Tensor<double>::zeros(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

TEST(Graph, OneDenseForward) {
  const auto model = attrikit::one_dense_model<double>(Tensor<double>({1, 2}, {2, -1}),
                                                       Tensor<double>::zeros({1}));
  Tensor<double> x({2}, {3, 4});
  const auto trace = attrikit::forward(model, x);
  const auto& out = trace.output("out");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0], 2.0);
}

TEST(Graph, ConcatJoinsLeadingAxis) {
  ModelGraph<double> m;
  m.input_shape = {2};
  auto d1 = attrikit::detail::dense_node<double>("left", kInputId, 2, 2);
  d1.weights["weight"] = Tensor<double>({2, 2}, {1, 0, 0, 1});
  auto d2 = attrikit::detail::dense_node<double>("right", kInputId, 2, 1);
  d2.weights["weight"] = Tensor<double>({1, 2}, {0, 1.5});
  m.nodes.push_back(std::move(d1));
  m.nodes.push_back(std::move(d2));
  m.nodes.push_back(attrikit::detail::simple_node<double>("cat", OpKind::concat, {"left", "right"}));
  m.output_id = "cat";
  m.prelogits_id = "cat";
  attrikit::validate_model(m);

  Tensor<double> x({2}, {1, 2});
  const auto trace = attrikit::forward(m, x);
  const auto& out = trace.output("cat");
  ASSERT_EQ(out.shape(), (std::vector<std::size_t>{3}));
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 2.0);
  EXPECT_DOUBLE_EQ(out[2], 3.0);
}

TEST(Graph, StaticShapeInferenceMatchesTrace) {
  Rng rng(41);
  for (std::size_t variant = 0; variant < 6; ++variant) {
    Rng net_rng = rng.fork(variant);
    attrikit::RandomNetOptions options;
    options.input_channels = 1 + variant % 3;
    options.conv_layers = 1 + variant % 2;
    options.with_concat = variant % 2 == 0;
    options.avgpool_only = variant % 3 != 0;
    const auto model = attrikit::make_random_net<double>(net_rng, options);
    const auto shapes = attrikit::infer_shapes(model);
    const auto trace = attrikit::forward(model, random_input(net_rng, model.input_shape));
    for (const auto& node : model.nodes)
      EXPECT_EQ(shapes.at(node.id), trace.output(node.id).shape()) << "node " << node.id;
  }
}

TEST(Graph, ForwardIsDeterministic) {
  Rng rng(43);
  const auto model = attrikit::make_random_net<double>(rng);
  const auto x = random_input(rng, model.input_shape);
  const auto a = attrikit::forward(model, x);
  const auto b = attrikit::forward(model, x);
  for (const auto& [id, out] : a.outputs) {
    const auto& other = b.output(id);
    for (std::size_t i = 0; i < out.size(); ++i)
      EXPECT_EQ(out[i], other[i]);  // bit-identical, not merely close
  }
}

TEST(Graph, SoftmaxTerminal) {
  ModelGraph<double> m;
  m.input_shape = {2};
  auto head = attrikit::detail::dense_node<double>("logits", kInputId, 2, 2);
  head.weights["weight"] = Tensor<double>({2, 2}, {1, 0, 0, 1});
  m.nodes.push_back(std::move(head));
  m.nodes.push_back(attrikit::detail::simple_node<double>("probs", OpKind::softmax, {"logits"}));
  m.output_id = "probs";
  m.prelogits_id = "logits";
  attrikit::validate_model(m);

  Tensor<double> x({2}, {0, 0});
  const auto trace = attrikit::forward(m, x);
  EXPECT_DOUBLE_EQ(trace.output("probs")[0], 0.5);
  EXPECT_DOUBLE_EQ(trace.output("probs")[1], 0.5);
}

TEST(Graph, PredictExamples) {
  // identity logits expose the raw input as prelogits
  ModelGraph<double> m;
  m.input_shape = {3};
  auto head = attrikit::detail::dense_node<double>("logits", kInputId, 3, 3);
  head.weights["weight"] = Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  m.nodes.push_back(std::move(head));
  m.output_id = "logits";
  m.prelogits_id = "logits";
  attrikit::validate_model(m);

  EXPECT_EQ(attrikit::predict(m, Tensor<double>({3}, {0.1, 2.3, -1.0})).class_index, 1u);

  ModelGraph<double> m2;
  m2.input_shape = {2};
  auto head2 = attrikit::detail::dense_node<double>("logits", kInputId, 2, 2);
  head2.weights["weight"] = Tensor<double>({2, 2}, {1, 0, 0, 1});
  m2.nodes.push_back(std::move(head2));
  m2.output_id = "logits";
  m2.prelogits_id = "logits";
  attrikit::validate_model(m2);

  // exact tie breaks toward the lowest class index
  EXPECT_EQ(attrikit::predict(m2, Tensor<double>({2}, {5, 5})).class_index, 0u);
}

TEST(Graph, PredictUnaffectedBySoftmax) {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    Rng net_rng = rng.fork(static_cast<std::uint64_t>(trial));
    auto model = attrikit::make_random_net<double>(net_rng);

    auto with_softmax = model;
    with_softmax.nodes.push_back(
        attrikit::detail::simple_node<double>("probs", OpKind::softmax, {model.output_id}));
    with_softmax.output_id = "probs";
    attrikit::validate_model(with_softmax);

    const auto x = random_input(net_rng, model.input_shape);
    const auto bare = attrikit::predict(model, x);
    const auto soft = attrikit::predict(with_softmax, x);
    EXPECT_EQ(bare.class_index, soft.class_index);
    EXPECT_EQ(attrikit::argmax(soft.prelogits),
              attrikit::argmax(attrikit::forward(with_softmax, x).output("probs")));
  }
}

// --- batch-norm folding ---

ModelGraph<double> conv_bn_model(double w, double b, double gamma, double beta, double mean,
                                 double var, double eps) {
  ModelGraph<double> m;
  m.input_shape = {1, 2, 2};
  auto conv = attrikit::detail::conv_node<double>("c", kInputId, 1, 1, 1, 1, 0);
  conv.weights.at("kernel")[0] = w;
  conv.weights.at("bias")[0] = b;
  m.nodes.push_back(std::move(conv));
  auto bn = attrikit::detail::batchnorm_node<double>("bn", "c", 1, eps);
  bn.weights.at("gamma")[0] = gamma;
  bn.weights.at("beta")[0] = beta;
  bn.weights.at("running_mean")[0] = mean;
  bn.weights.at("running_var")[0] = var;
  m.nodes.push_back(std::move(bn));
  m.output_id = "bn";
  m.prelogits_id = "bn";
  attrikit::validate_model(m);
  return m;
}

TEST(Graph, FoldBatchnormHandWorked) {
  // scale = gamma / sqrt(var + eps) = 3/2, so w' = 2 * 1.5 = 3, b' = 0 + 1 = 1
  const auto model = conv_bn_model(2.0, 0.0, 3.0, 1.0, 0.0, 4.0, 0.0);
  const auto folded = attrikit::fold_batchnorm(model);
  ASSERT_EQ(folded.nodes.size(), 1u);
  const auto& conv = folded.node("c");
  EXPECT_DOUBLE_EQ(conv.weight("kernel")[0], 3.0);
  EXPECT_DOUBLE_EQ(conv.weight("bias")[0], 1.0);
  EXPECT_EQ(folded.output_id, "c");
  EXPECT_EQ(folded.prelogits_id, "c");
}

TEST(Graph, FoldIdentityBatchnormKeepsWeights) {
  const auto model = conv_bn_model(1.75, -0.5, 1.0, 0.0, 0.0, 1.0, 0.0);
  const auto folded = attrikit::fold_batchnorm(model);
  EXPECT_DOUBLE_EQ(folded.node("c").weight("kernel")[0], 1.75);
  EXPECT_DOUBLE_EQ(folded.node("c").weight("bias")[0], -0.5);
}

TEST(Graph, FoldBatchnormPreservesOutputs) {
  Rng rng(53);
  ModelGraph<double> m;
  m.input_shape = {2, 4, 4};
  auto conv = attrikit::detail::conv_node<double>("c", kInputId, 2, 3, 3, 1, 1);
  for (auto& [slot, t] : conv.weights)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, 0.5);
  m.nodes.push_back(std::move(conv));
  auto bn = attrikit::detail::batchnorm_node<double>("bn", "c", 3, 1e-3);
  for (const char* slot : {"gamma", "beta", "running_mean"})
    for (std::size_t i = 0; i < 3; ++i) bn.weights.at(slot)[i] = rng.normal(0.0, 0.7);
  for (std::size_t i = 0; i < 3; ++i) bn.weights.at("running_var")[i] = 0.3 + rng.uniform();
  m.nodes.push_back(std::move(bn));
  m.output_id = "bn";
  m.prelogits_id = "bn";
  attrikit::validate_model(m);

  const auto folded = attrikit::fold_batchnorm(m);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_input(rng, m.input_shape);
    const auto before = attrikit::forward(m, x).output("bn");
    const auto after = attrikit::forward(folded, x).output("c");
    ASSERT_EQ(before.shape(), after.shape());
    const double peak = attrikit::max_abs_value(before);
    for (std::size_t i = 0; i < before.size(); ++i)
      EXPECT_LE(std::abs(before[i] - after[i]), 1e-5 * std::max(1.0, peak));
  }
}

TEST(Graph, FoldBatchnormPreservesPredictions) {
  Rng rng(59);
  auto model = attrikit::reference_cnn<double>(3, 16);
  attrikit::Rng init_rng(99);
  // give the reference net nonzero weights so predictions are nontrivial
  for (auto& node : model.nodes)
    for (auto& [slot, t] : node.weights) {
      if (slot == "epsilon") continue;
      for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = slot == "running_var" ? 0.5 + init_rng.uniform() : init_rng.normal(0.0, 0.3);
    }
  const auto folded = attrikit::fold_batchnorm(model);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> x = Tensor<double>::zeros(model.input_shape);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    EXPECT_EQ(attrikit::predict(model, x).class_index,
              attrikit::predict(folded, x).class_index);
  }
}

TEST(Graph, FoldBatchnormRejectsUnfoldablePlacements) {
  // batchnorm directly on the model input has no producer to fold into
  ModelGraph<double> on_input;
  on_input.input_shape = {1, 2, 2};
  on_input.nodes.push_back(attrikit::detail::batchnorm_node<double>("bn", kInputId, 1));
  on_input.output_id = "bn";
  on_input.prelogits_id = "bn";
  attrikit::validate_model(on_input);
  EXPECT_KIND(attrikit::fold_batchnorm(on_input), ErrorKind::unfoldable_batchnorm);

  // batchnorm after a pool has no linear producer
  ModelGraph<double> after_pool;
  after_pool.input_shape = {1, 2, 2};
  after_pool.nodes.push_back(
      attrikit::detail::simple_node<double>("p", OpKind::avgpool, {kInputId}, 2, 2));
  after_pool.nodes.push_back(attrikit::detail::batchnorm_node<double>("bn", "p", 1));
  after_pool.output_id = "bn";
  after_pool.prelogits_id = "bn";
  attrikit::validate_model(after_pool);
  EXPECT_KIND(attrikit::fold_batchnorm(after_pool), ErrorKind::unfoldable_batchnorm);

  // conv that also feeds a second consumer cannot absorb the fold
  ModelGraph<double> shared;
  shared.input_shape = {1, 2, 2};
  auto conv = attrikit::detail::conv_node<double>("c", kInputId, 1, 1, 1, 1, 0);
  conv.weights.at("kernel")[0] = 1.0;
  shared.nodes.push_back(std::move(conv));
  shared.nodes.push_back(attrikit::detail::batchnorm_node<double>("bn", "c", 1));
  shared.nodes.push_back(attrikit::detail::simple_node<double>("cat", OpKind::concat, {"c", "bn"}));
  shared.output_id = "cat";
  shared.prelogits_id = "cat";
  attrikit::validate_model(shared);
  EXPECT_KIND(attrikit::fold_batchnorm(shared), ErrorKind::unfoldable_batchnorm);
}

// --- structural validation ---

TEST(Graph, ValidationRejectsForwardReferences) {
  ModelGraph<double> m;
  m.input_shape = {2};
  m.nodes.push_back(attrikit::detail::simple_node<double>("a", OpKind::relu, {"b"}));
  m.nodes.push_back(attrikit::detail::simple_node<double>("b", OpKind::relu, {"a"}));
  m.output_id = "b";
  m.prelogits_id = "b";
  EXPECT_KIND(attrikit::validate_model(m), ErrorKind::cyclic_graph);
}

TEST(Graph, ValidationNamesNodeMissingWeights) {
  ModelGraph<double> m;
  m.input_shape = {2};
  LayerNode<double> bare;
  bare.id = "naked";
  bare.op = OpKind::dense;
  bare.inputs = {kInputId};
  m.nodes.push_back(std::move(bare));
  m.output_id = "naked";
  m.prelogits_id = "naked";
  try {
    attrikit::validate_model(m);
    FAIL() << "expected missing_weight";
  } catch (const attrikit::Error& e) {
    EXPECT_EQ(e.kind(), attrikit::ErrorKind::missing_weight);
    EXPECT_NE(std::string(e.what()).find("naked"), std::string::npos)
        << "error must name the offending node: " << e.what();
  }
}

TEST(Graph, ValidationRejectsDuplicateAndReservedIds) {
  ModelGraph<double> m;
  m.input_shape = {2};
  m.nodes.push_back(attrikit::detail::simple_node<double>("a", OpKind::relu, {kInputId}));
  m.nodes.push_back(attrikit::detail::simple_node<double>("a", OpKind::relu, {kInputId}));
  m.output_id = "a";
  m.prelogits_id = "a";
  EXPECT_KIND(attrikit::validate_model(m), ErrorKind::format_error);

  ModelGraph<double> reserved;
  reserved.input_shape = {2};
  reserved.nodes.push_back(attrikit::detail::simple_node<double>(kInputId, OpKind::relu, {kInputId}));
  reserved.output_id = kInputId;
  reserved.prelogits_id = kInputId;
  EXPECT_KIND(attrikit::validate_model(reserved), ErrorKind::format_error);
}

TEST(Graph, UnknownOpNameRejected) {
  EXPECT_KIND(attrikit::op_kind_from_name("transposed_conv"), ErrorKind::unknown_op);
  EXPECT_EQ(attrikit::op_kind_from_name("conv2d"), OpKind::conv2d);
  EXPECT_EQ(std::string(attrikit::op_kind_name(OpKind::globalavgpool)), "globalavgpool");
}

TEST(Graph, DenseFlattensSpatialInput) {
  ModelGraph<double> m;
  m.input_shape = {2, 2, 2};
  auto head = attrikit::detail::dense_node<double>("head", kInputId, 8, 1);
  for (std::size_t i = 0; i < 8; ++i) head.weights.at("weight")[i] = static_cast<double>(i);
  m.nodes.push_back(std::move(head));
  m.output_id = "head";
  m.prelogits_id = "head";
  attrikit::validate_model(m);

  Tensor<double> x = Tensor<double>::full({2, 2, 2}, 1.0);
  // row-major flatten dotted with 0..7
  EXPECT_DOUBLE_EQ(attrikit::forward(m, x).output("head")[0], 28.0);
}

TEST(Graph, ForwardRejectsWrongInputShape) {
  const auto model = attrikit::one_dense_model<double>(Tensor<double>({1, 2}, {2, -1}),
                                                       Tensor<double>::zeros({1}));
  EXPECT_KIND(attrikit::forward(model, Tensor<double>::zeros({3})), ErrorKind::shape_mismatch);
}

}  // namespace
