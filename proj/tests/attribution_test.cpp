#include "attrikit/attribution.hpp"

#include <cmath>

#include <json.hpp>

#include "attrikit/rng.hpp"
#include "attrikit/validate.hpp"
#include "attrikit/zoo.hpp"
#include "test_support.hpp"

namespace {

using attrikit::kInputId;
using attrikit::Method;
using attrikit::MethodParams;
using attrikit::ModelGraph;
using attrikit::OpKind;
using attrikit::Rng;
using attrikit::Tensor;

ModelGraph<double> worked_example_model() {
  return attrikit::one_dense_model<double>(Tensor<double>({1, 2}, {2, -1}),
                                           Tensor<double>::zeros({1}));
}

const Tensor<double> kWorkedInput({2}, {3, 4});

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

// --- the five closed-form single-layer oracles plus the guided trace ---

TEST(Attribution, SaliencyClosedForm) {
  const auto raw = attrikit::saliency_raw(worked_example_model(), kWorkedInput, 0);
  EXPECT_NEAR(raw[0], 2.0, 1e-6);
  EXPECT_NEAR(raw[1], -1.0, 1e-6);
}

TEST(Attribution, GradientTimesInputClosedForm) {
  const auto raw = attrikit::gradient_times_input_raw(worked_example_model(), kWorkedInput, 0);
  EXPECT_NEAR(raw[0], 6.0, 1e-6);
  EXPECT_NEAR(raw[1], -4.0, 1e-6);
}

TEST(Attribution, IntegratedGradientsClosedForm) {
  // linear model: exact at every step count, and the sum telescopes to F(x)-F(0)
  const auto model = worked_example_model();
  for (std::size_t steps : {1u, 17u, 300u}) {
    const auto raw = attrikit::integrated_gradients_raw(model, kWorkedInput, 0, steps);
    EXPECT_NEAR(raw[0], 6.0, 1e-6);
    EXPECT_NEAR(raw[1], -4.0, 1e-6);
    EXPECT_NEAR(attrikit::sum(raw), 2.0, 1e-6);
  }
}

TEST(Attribution, LrpClosedForm) {
  const auto model = worked_example_model();
  const auto z = attrikit::lrp_raw(model, kWorkedInput, 0, 0.0);
  EXPECT_NEAR(z[0], 6.0, 1e-6);
  EXPECT_NEAR(z[1], -4.0, 1e-6);

  // epsilon 0.1 rescales by 2/2.1
  const auto eps = attrikit::lrp_raw(model, kWorkedInput, 0, 0.1);
  EXPECT_NEAR(eps[0], 5.7142857, 1e-6);
  EXPECT_NEAR(eps[1], -3.8095238, 1e-6);
}

TEST(Attribution, DeepTaylorClosedForm) {
  // z+ keeps only w=2: z+ = [6,0], R_out = 2, so input relevance [2,0]
  const auto raw = attrikit::deep_taylor_raw(worked_example_model(), kWorkedInput, 0);
  EXPECT_NEAR(raw[0], 2.0, 1e-6);
  EXPECT_NEAR(raw[1], 0.0, 1e-6);
}

TEST(Attribution, GuidedBackpropClosedForm) {
  const auto model = two_layer_relu_net();
  Tensor<double> x({2}, {2, 1});
  const auto guided = attrikit::guided_backprop_raw(model, x, 0);
  EXPECT_NEAR(guided[0], 1.0, 1e-6);
  EXPECT_NEAR(guided[1], 0.0, 1e-6);
  const auto plain = attrikit::saliency_raw(model, x, 0);
  EXPECT_NEAR(plain[1], -1.0, 1e-6);
}

TEST(Attribution, GuidedEqualsSaliencyWithoutRelu) {
  const auto model = worked_example_model();
  const auto guided = attrikit::guided_backprop_raw(model, kWorkedInput, 0);
  const auto plain = attrikit::saliency_raw(model, kWorkedInput, 0);
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_EQ(guided[i], plain[i]);
}

// --- smoothgrad ---

TEST(Attribution, SmoothgradSigmaZeroBitEqualsSaliency) {
  Rng rng(107);
  const auto model = attrikit::make_random_net<double>(rng);
  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

  const auto sal = attrikit::saliency_raw(model, x, 0);
  const auto sg = attrikit::smoothgrad_raw<double>(model, x, 0, 50, 0.0, 42);
  for (std::size_t i = 0; i < sal.size(); ++i) EXPECT_EQ(sg[i], sal[i]);
}

TEST(Attribution, SmoothgradMatchesRecomputedSampleMean) {
  Rng rng(109);
  const auto model = attrikit::make_random_net<double>(rng);
  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

  const std::size_t n = 8;
  const double sigma = 0.1;
  const std::uint64_t seed = 1234;
  const auto sg = attrikit::smoothgrad_raw<double>(model, x, 0, n, sigma, seed);

  // independently regenerate the 8 noisy inputs and average in sample order
  Rng noise(seed);
  Tensor<double> acc = Tensor<double>::zeros(x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    Tensor<double> noisy = x;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += noise.normal(0.0, sigma);
    attrikit::accumulate(acc, attrikit::saliency_raw(model, noisy, 0));
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= static_cast<double>(n);

  for (std::size_t i = 0; i < sg.size(); ++i) EXPECT_EQ(sg[i], acc[i]);
}

TEST(Attribution, SmoothgradOnLinearModelEqualsSaliency) {
  const auto model = worked_example_model();
  const auto sal = attrikit::saliency_raw(model, kWorkedInput, 0);
  const auto sg = attrikit::smoothgrad_raw<double>(model, kWorkedInput, 0, 5, 0.5, 7);
  for (std::size_t i = 0; i < sal.size(); ++i) EXPECT_DOUBLE_EQ(sg[i], sal[i]);
}

TEST(Attribution, SmoothgradParameterErrors) {
  const auto model = worked_example_model();
  EXPECT_KIND(attrikit::smoothgrad_raw<double>(model, kWorkedInput, 0, 0, 0.1, 0),
              ErrorKind::invalid_argument);
  EXPECT_KIND(attrikit::smoothgrad_raw<double>(model, kWorkedInput, 0, 4, -0.1, 0),
              ErrorKind::invalid_argument);
}

// --- integrated gradients ---

TEST(Attribution, IgZeroMapAtBaseline) {
  Rng rng(113);
  const auto model = attrikit::make_random_net<double>(rng);
  const Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  const auto raw = attrikit::integrated_gradients_raw(model, x, 0, 25);
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_DOUBLE_EQ(raw[i], 0.0);
}

TEST(Attribution, IgCompletenessAndHighResolutionAgreement) {
  Rng root(20240917);
  Rng rng = root.fork(100 + 1);
  const auto model = attrikit::detail::oracle_net<double>(rng, 1, false);
  const std::size_t target = rng.uniform_index(attrikit::detail::prelogit_count(model));
  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

  const double span = attrikit::prelogit_value(model, x, target) -
                      attrikit::prelogit_value(model, Tensor<double>::zeros(model.input_shape), target);
  ASSERT_GT(std::abs(span), 1e-3);

  const auto raw300 = attrikit::integrated_gradients_raw(model, x, target, 300);
  EXPECT_LT(std::abs(attrikit::sum(raw300) - span) / std::abs(span), 0.01);

  const auto raw30000 = attrikit::integrated_gradients_raw(model, x, target, 30000);
  EXPECT_LT(attrikit::detail::relative_difference(raw300, raw30000), 1e-3);
}

TEST(Attribution, IgParameterErrors) {
  const auto model = worked_example_model();
  EXPECT_KIND(attrikit::integrated_gradients_raw(model, kWorkedInput, 0, 0),
              ErrorKind::invalid_argument);
  Tensor<double> wrong_baseline = Tensor<double>::zeros({3});
  EXPECT_KIND(attrikit::integrated_gradients_raw(model, kWorkedInput, 0, 10, &wrong_baseline),
              ErrorKind::shape_mismatch);
}

// --- relevance propagation ---

TEST(Attribution, LrpConservesOnZeroBiasNets) {
  Rng root(20240917);
  for (std::size_t i = 0; i < 4; ++i) {
    Rng rng = root.fork(300 + i);
    const auto model = attrikit::detail::oracle_net<double>(rng, i, true);
    const std::size_t target = rng.uniform_index(attrikit::detail::prelogit_count(model));
    const auto x = attrikit::detail::sample_clean_input(model, rng, target, 1e-9, 1e-3);
    const auto raw = attrikit::lrp_raw(model, x, target, 0.0);
    const double a_target = attrikit::prelogit_value(model, x, target);
    EXPECT_LT(std::abs(attrikit::sum(raw) - a_target) / std::abs(a_target), 1e-4) << "net " << i;
  }
}

TEST(Attribution, GiEqualsLrpZOnBiasFreeNets) {
  Rng root(20240917);
  for (std::size_t i = 0; i < 4; ++i) {
    Rng rng = root.fork(300 + i);
    const auto model = attrikit::detail::oracle_net<double>(rng, i, true);
    const std::size_t target = rng.uniform_index(attrikit::detail::prelogit_count(model));
    const auto x = attrikit::detail::sample_clean_input(model, rng, target, 1e-9, 1e-3);
    const auto gi = attrikit::gradient_times_input_raw(model, x, target);
    const auto lrp = attrikit::lrp_raw(model, x, target, 0.0);
    EXPECT_LT(attrikit::detail::relative_difference(gi, lrp), 1e-5) << "net " << i;
  }
}

TEST(Attribution, BiasedCounterexampleBreaksEquivalence) {
  // a biased layer drives the average-pool output to exactly zero: relevance
  // dies there while the gradient path stays open
  const auto model = attrikit::detail::biased_equivalence_counterexample();
  Tensor<double> x({1, 2, 2}, {2, 0, 2, 0});

  const auto gi = attrikit::gradient_times_input_raw(model, x, 0);
  EXPECT_DOUBLE_EQ(gi[0], 0.5);
  EXPECT_DOUBLE_EQ(gi[1], 0.0);
  EXPECT_DOUBLE_EQ(gi[2], 0.5);
  EXPECT_DOUBLE_EQ(gi[3], 0.0);

  const auto lrp = attrikit::lrp_raw(model, x, 0, 0.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(lrp[i], 0.0);

  EXPECT_GT(attrikit::detail::relative_difference(gi, lrp), 1e-2);
}

ModelGraph<double> dense_relu_tower(Rng& rng, bool positive_weights) {
  ModelGraph<double> m;
  m.input_shape = {6};
  auto d1 = attrikit::detail::dense_node<double>("d1", kInputId, 6, 5);
  auto d2 = attrikit::detail::dense_node<double>("d2", "a1", 5, 4);
  auto head = attrikit::detail::dense_node<double>("head", "a2", 4, 2);
  for (auto* node : {&d1, &d2, &head})
    for (std::size_t i = 0; i < node->weights.at("weight").size(); ++i) {
      const double v = rng.normal(0.0, 0.6);
      node->weights.at("weight")[i] = positive_weights ? std::abs(v) + 0.05 : v;
    }
  m.nodes.push_back(std::move(d1));
  m.nodes.push_back(attrikit::detail::simple_node<double>("a1", OpKind::relu, {"d1"}));
  m.nodes.push_back(std::move(d2));
  m.nodes.push_back(attrikit::detail::simple_node<double>("a2", OpKind::relu, {"d2"}));
  m.nodes.push_back(std::move(head));
  m.output_id = "head";
  m.prelogits_id = "head";
  attrikit::validate_model(m);
  return m;
}

TEST(Attribution, DeepTaylorNonnegativeAndConservingOnVectorInput) {
  Rng rng(127);
  const auto model = dense_relu_tower(rng, false);
  Tensor<double> x = Tensor<double>::zeros({6});
  for (std::size_t i = 0; i < 6; ++i) x[i] = rng.uniform(0.1, 1.0);

  // pick a target whose activation is positive so the seed is nontrivial
  std::size_t target = 0;
  double a_target = attrikit::prelogit_value(model, x, 0);
  if (a_target <= 0) {
    target = 1;
    a_target = attrikit::prelogit_value(model, x, 1);
  }
  ASSERT_GT(a_target, 0.0);

  const auto raw = attrikit::deep_taylor_raw(model, x, target);
  double total = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_GE(raw[i], 0.0);
    total += raw[i];
  }
  EXPECT_LT(std::abs(total - a_target) / a_target, 0.05);
}

TEST(Attribution, DeepTaylorEqualsLrpOnAllPositiveWeights) {
  // with every weight positive and no biases, z+ coincides with the z-rule
  Rng rng(131);
  const auto model = dense_relu_tower(rng, true);
  Tensor<double> x = Tensor<double>::zeros({6});
  for (std::size_t i = 0; i < 6; ++i) x[i] = rng.uniform(0.1, 1.0);

  const auto dtd = attrikit::deep_taylor_raw(model, x, 0);
  const auto lrp = attrikit::lrp_raw(model, x, 0, 0.0);
  EXPECT_LT(attrikit::detail::relative_difference(dtd, lrp), 1e-10);
}

TEST(Attribution, DeepTaylorConservesThroughPixelBounds) {
  Rng root(20240917);
  Rng rng = root.fork(300);  // a bias-free conv net
  const auto model = attrikit::detail::oracle_net<double>(rng, 0, true);

  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.05, 0.95);  // pixel domain
  std::size_t target = 0;
  double a_target = 0;
  for (std::size_t t = 0; t < attrikit::detail::prelogit_count(model); ++t) {
    const double v = attrikit::prelogit_value(model, x, t);
    if (v > a_target) {
      a_target = v;
      target = t;
    }
  }
  ASSERT_GT(a_target, 0.0);

  const auto raw = attrikit::deep_taylor_raw(model, x, target, 0.0, 1.0);
  EXPECT_LT(std::abs(attrikit::sum(raw) - a_target) / a_target, 0.05);
}

TEST(Attribution, DeepTaylorBoundsMustBeOrdered) {
  const auto model = worked_example_model();
  EXPECT_KIND(attrikit::deep_taylor_raw(model, kWorkedInput, 0, 1.0, 1.0),
              ErrorKind::invalid_argument);
}

TEST(Attribution, DegeneracyRaisedOnlyWhenRelevanceIsNonzero) {
  // hidden unit with only a negative weight but positive bias: its z+
  // denominator is exactly zero while downstream relevance is not
  ModelGraph<double> m;
  m.input_shape = {1};
  auto hidden = attrikit::detail::dense_node<double>("hidden", kInputId, 1, 1);
  hidden.weights["weight"] = Tensor<double>({1, 1}, {-1.0});
  hidden.weights["bias"] = Tensor<double>({1}, {2.0});
  m.nodes.push_back(std::move(hidden));
  m.nodes.push_back(attrikit::detail::simple_node<double>("act", OpKind::relu, {"hidden"}));
  auto head = attrikit::detail::dense_node<double>("head", "act", 1, 1);
  head.weights["weight"] = Tensor<double>({1, 1}, {3.0});
  m.nodes.push_back(std::move(head));
  m.output_id = "head";
  m.prelogits_id = "head";
  attrikit::validate_model(m);

  Tensor<double> x({1}, {1.0});
  EXPECT_KIND(attrikit::deep_taylor_raw(m, x, 0), ErrorKind::numerical_degeneracy);

  // the zero-relevance counterpart passes: the counterexample net hits a
  // zero denominator at the pool but carries zero relevance there
  const auto benign = attrikit::detail::biased_equivalence_counterexample();
  Tensor<double> bx({1, 2, 2}, {2, 0, 2, 0});
  EXPECT_NO_THROW(attrikit::lrp_raw(benign, bx, 0, 0.0));
}

TEST(Attribution, RelevanceMethodsRequireFoldedBatchnorm) {
  ModelGraph<double> m;
  m.input_shape = {1, 2, 2};
  auto conv = attrikit::detail::conv_node<double>("c", kInputId, 1, 1, 1, 1, 0);
  conv.weights.at("kernel")[0] = 1.5;
  m.nodes.push_back(std::move(conv));
  m.nodes.push_back(attrikit::detail::batchnorm_node<double>("bn", "c", 1));
  auto head = attrikit::detail::dense_node<double>("head", "bn", 4, 1);
  for (std::size_t i = 0; i < 4; ++i) head.weights.at("weight")[i] = 0.5;
  m.nodes.push_back(std::move(head));
  m.output_id = "head";
  m.prelogits_id = "head";
  attrikit::validate_model(m);

  Tensor<double> x({1, 2, 2}, {0.2, 0.4, 0.6, 0.8});
  try {
    attrikit::lrp_raw(m, x, 0, 0.0);
    FAIL() << "expected unsupported_node";
  } catch (const attrikit::Error& e) {
    EXPECT_EQ(e.kind(), attrikit::ErrorKind::unsupported_node);
    EXPECT_NE(std::string(e.what()).find("fold_batchnorm"), std::string::npos)
        << "error must point at the folding remedy: " << e.what();
  }

  // identity batchnorm under the opt-in linear path equals the folded result
  const auto with_bn = attrikit::lrp_raw(m, x, 0, 0.0, true);
  const auto folded = attrikit::lrp_raw(attrikit::fold_batchnorm(m), x, 0, 0.0);
  EXPECT_LT(attrikit::detail::relative_difference(with_bn, folded), 1e-9);

  // gradient methods accept the unfolded form as-is
  EXPECT_NO_THROW(attrikit::saliency_raw(m, x, 0));
}

// --- the explain() entry point and method registry ---

TEST(Attribution, ExplainPopulatesMapAndMetadata) {
  const auto model = worked_example_model();
  const auto map = attrikit::explain(model, kWorkedInput, 0, Method::gradient_input);

  ASSERT_EQ(map.raw.shape(), (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_NEAR(map.raw[0], 6.0, 1e-6);
  EXPECT_NEAR(map.raw[1], -4.0, 1e-6);
  ASSERT_EQ(map.reduced.shape(), (std::vector<std::size_t>{1, 2}));
  EXPECT_NEAR(map.reduced[1], 4.0, 1e-6);  // reduction is channel |.| sum
  EXPECT_EQ(map.method, "gi");
  EXPECT_EQ(map.target_layer, "out");
  EXPECT_EQ(map.target, 0u);

  const auto meta = nlohmann::json::parse(map.metadata_json);
  EXPECT_EQ(meta.at("method"), "gi");
  EXPECT_EQ(meta.at("target"), 0);
  EXPECT_EQ(meta.at("target_layer"), "out");
  EXPECT_EQ(meta.at("model_digest"), attrikit::model_digest(model));
}

TEST(Attribution, ExplainRecordsMethodParameters) {
  const auto model = worked_example_model();
  MethodParams params;
  params.ig_steps = 40;
  const auto ig = attrikit::explain(model, kWorkedInput, 0, Method::integrated_gradients, params);
  const auto meta = nlohmann::json::parse(ig.metadata_json);
  EXPECT_EQ(meta.at("params").at("steps"), 40);
  EXPECT_EQ(meta.at("params").at("baseline"), "zeros");

  params.sg_samples = 3;
  params.sg_seed = 99;
  const auto sg = attrikit::explain(model, kWorkedInput, 0, Method::smoothgrad, params);
  const auto sg_meta = nlohmann::json::parse(sg.metadata_json);
  EXPECT_EQ(sg_meta.at("params").at("n_samples"), 3);
  EXPECT_EQ(sg_meta.at("params").at("seed"), 99);
  // sigma left unset resolves to 0.15 * (max - min) = 0.15
  EXPECT_NEAR(sg_meta.at("params").at("sigma").get<double>(), 0.15, 1e-12);
}

TEST(Attribution, ExplainIsDeterministic) {
  Rng rng(137);
  const auto model = attrikit::make_random_net<double>(rng);
  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

  for (Method m : attrikit::all_methods()) {
    const auto a = attrikit::explain(model, x, 0, m);
    const auto b = attrikit::explain(model, x, 0, m);
    ASSERT_EQ(a.raw.shape(), b.raw.shape());
    for (std::size_t i = 0; i < a.raw.size(); ++i)
      EXPECT_EQ(a.raw[i], b.raw[i]) << attrikit::method_name(m);
    EXPECT_EQ(a.metadata_json, b.metadata_json);
  }
}

TEST(Attribution, FinalLayerScalingHomogeneity) {
  Rng rng(139);
  const auto model = attrikit::make_random_net<double>(rng);
  auto scaled = model;
  auto& head = scaled.nodes[scaled.index_of("head")];
  head.weights["weight"] = attrikit::scale(head.weight("weight"), 3.0);
  head.weights["bias"] = attrikit::scale(head.weight("bias"), 3.0);

  Tensor<double> x = Tensor<double>::zeros(model.input_shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

  for (Method m : {Method::saliency, Method::gradient_input, Method::integrated_gradients}) {
    const auto base = attrikit::explain(model, x, 0, m);
    const auto big = attrikit::explain(scaled, x, 0, m);
    for (std::size_t i = 0; i < base.raw.size(); ++i)
      EXPECT_NEAR(big.raw[i], 3.0f * base.raw[i],
                  1e-5 * std::max(1.0, std::abs(3.0 * base.raw[i])))
          << attrikit::method_name(m);
  }

  // relevance ratios are scale-invariant
  const auto lrp_base = attrikit::lrp_raw(model, x, 0, 0.0);
  const auto lrp_big = attrikit::lrp_raw(scaled, x, 0, 0.0);
  const double sum_base = attrikit::sum(lrp_base), sum_big = attrikit::sum(lrp_big);
  for (std::size_t i = 0; i < lrp_base.size(); ++i)
    EXPECT_NEAR(lrp_big[i] / sum_big, lrp_base[i] / sum_base, 1e-9);
}

TEST(Attribution, MethodNamesRoundTrip) {
  const std::vector<std::string> names = {"saliency", "gi", "gbp", "sg", "ig", "dtd", "lrp-z", "lrp-eps"};
  ASSERT_EQ(attrikit::all_methods().size(), names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(attrikit::method_name(attrikit::all_methods()[i]), names[i]);
    EXPECT_EQ(attrikit::method_from_name(names[i]), attrikit::all_methods()[i]);
  }

  try {
    attrikit::method_from_name("deconvnet");
    FAIL() << "expected invalid_argument";
  } catch (const attrikit::Error& e) {
    EXPECT_EQ(e.kind(), attrikit::ErrorKind::invalid_argument);
    for (const auto& n : names)
      EXPECT_NE(std::string(e.what()).find(n), std::string::npos)
          << "error must list '" << n << "': " << e.what();
  }
}

TEST(Attribution, UnknownBaselinePresetRejected) {
  const auto model = worked_example_model();
  MethodParams params;
  params.ig_baseline = "noise";
  EXPECT_KIND(attrikit::explain(model, kWorkedInput, 0, Method::integrated_gradients, params),
              ErrorKind::invalid_argument);
}

}  // namespace
