#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "attrikit/attribution.hpp"
#include "attrikit/autodiff.hpp"
#include "attrikit/zoo.hpp"

namespace attrikit {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Deliberate breakage switches for exercising the suites themselves.
enum class FaultInjection {
  none,
  gbp_skip_clamp,  // backpropagate plainly where guided mode was requested
};

struct ValidationOptions {
  std::uint64_t seed = 20240917;
  std::size_t net_count = 20;
  FaultInjection fault = FaultInjection::none;
  std::vector<std::string> only;  // empty = run everything
};

inline const std::vector<std::string>& list_checks() {
  static const std::vector<std::string> names = {
      "gradcheck", "ig-completeness", "lrp-conservation", "gi-lrp-z", "gbp-negclamp"};
  return names;
}

namespace detail {

inline std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

/// max |a-b| normalized by the larger of the two maps' peak magnitudes.
template <typename Scalar>
double relative_difference(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  double peak = std::max(static_cast<double>(max_abs_value(a)),
                         static_cast<double>(max_abs_value(b)));
  if (peak == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst / peak;
}

inline RandomNetOptions oracle_net_options(std::size_t index, bool bias_free) {
  RandomNetOptions options;
  options.input_channels = 1 + index % 2;
  options.input_size = 6;
  options.conv_layers = 1 + index % 2;
  options.num_outputs = 2 + index % 3;
  options.bias_free = bias_free;
  options.with_concat = index % 3 == 0;
  options.avgpool_only = true;  // smooth everywhere: safe for finite differences
  return options;
}

/// Draw an input whose ReLU pre-activations all clear the kink margin, and
/// whose target prelogit is usefully far from zero.
inline Tensor<double> sample_clean_input(const ModelGraph<double>& model, Rng& rng,
                                         std::size_t target, double kink_margin,
                                         double min_output) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Tensor<double> x = Tensor<double>::zeros(model.input_shape);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    const auto trace = forward(model, x);
    bool clean = std::abs(trace.output(model.prelogits_id)[target]) >= min_output;
    for (const auto& node : model.nodes) {
      if (!clean) break;
      if (node.op != OpKind::relu) continue;
      const Tensor<double>& pre = node.inputs[0] == kInputId ? x : trace.output(node.inputs[0]);
      for (std::size_t i = 0; i < pre.size(); ++i)
        if (std::abs(pre[i]) < kink_margin) {
          clean = false;
          break;
        }
    }
    if (clean) return x;
  }
  raise(ErrorKind::invalid_argument, "could not sample an input away from ReLU kinks");
}

/// The "net i" of a family is pinned by its fork label, so suites that must
/// run on the same nets (gradient check and IG completeness; conservation
/// and the equivalence check) reconstruct identical models independently.
template <typename Scalar>
ModelGraph<Scalar> oracle_net(Rng& rng, std::size_t index, bool bias_free) {
  return make_random_net<Scalar>(rng, oracle_net_options(index, bias_free));
}

inline std::size_t prelogit_count(const ModelGraph<double>& model) {
  return forward(model, Tensor<double>::zeros(model.input_shape))
      .output(model.prelogits_id)
      .size();
}

/// Fixed net where a biased layer drives an average-pool output to exactly
/// zero: relevance flow dies there while the gradient path stays open, so
/// gradient*input and the z-rule provably part ways.
inline ModelGraph<double> biased_equivalence_counterexample() {
  ModelGraph<double> m;
  m.input_shape = {1, 2, 2};
  auto conv = detail::conv_node<double>("shift", kInputId, 1, 1, 1, 1, 0);
  conv.weights.at("kernel")[0] = 1.0;
  conv.weights.at("bias")[0] = -1.0;
  m.nodes.push_back(std::move(conv));
  m.nodes.push_back(detail::simple_node<double>("pool", OpKind::avgpool, {"shift"}, 2, 2));
  auto head = detail::dense_node<double>("head", "pool", 1, 1);
  head.weights.at("weight")[0] = 1.0;
  head.weights.at("bias")[0] = 1.0;
  m.nodes.push_back(std::move(head));
  m.output_id = "head";
  m.prelogits_id = "head";
  validate_model(m);
  return m;
}

}  // namespace detail

// --- the suites ---

inline CheckResult check_gradcheck(const ValidationOptions& options) {
  CheckResult result{"gradcheck", true, ""};
  const double h = 1e-4, tolerance = 1e-6;
  double worst = 0.0;
  Rng root(options.seed);
  for (std::size_t i = 0; i < options.net_count; ++i) {
    Rng rng = root.fork(100 + i);
    const auto model = detail::oracle_net<double>(rng, i, false);
    const std::size_t target = rng.uniform_index(detail::prelogit_count(model));
    const Tensor<double> x = detail::sample_clean_input(model, rng, target, 10.0 * h, 0.0);
    const Tensor<double> g = input_gradient(model, x, target);
    const Tensor<double> fd = finite_difference_gradient(model, x, target, h);
    worst = std::max(worst, detail::relative_difference(g, fd));
  }
  result.passed = worst < tolerance;
  result.detail = "max relative error " + detail::format_number(worst) + " (tolerance " +
                  detail::format_number(tolerance) + ") over " + std::to_string(options.net_count) +
                  " nets";
  return result;
}

inline CheckResult check_ig_completeness(const ValidationOptions& options) {
  CheckResult result{"ig-completeness", true, ""};
  const double tolerance = 0.01;
  double worst_final = 0.0;
  bool decreased_everywhere = true;
  Rng root(options.seed);
  for (std::size_t i = 0; i < options.net_count; ++i) {
    // same fork label as the gradient check: completeness runs on those nets
    Rng rng = root.fork(100 + i);
    const auto model = detail::oracle_net<double>(rng, i, false);
    const std::size_t target = rng.uniform_index(detail::prelogit_count(model));

    // pool over several integration paths: per-net error is the summed
    // absolute completeness defect over the summed |F(x) - F(baseline)|,
    // which no single straight line can dominate (or luckily cancel)
    std::vector<Tensor<double>> points;
    std::vector<double> spans;
    double span_total = 0.0;
    for (int draw = 0; draw < 8; ++draw) {
      Tensor<double> candidate = Tensor<double>::zeros(model.input_shape);
      for (std::size_t p = 0; p < candidate.size(); ++p) candidate[p] = rng.uniform(-1.0, 1.0);
      const double span = prelogit_value(model, candidate, target) -
                          prelogit_value(model, Tensor<double>::zeros(model.input_shape), target);
      points.push_back(std::move(candidate));
      spans.push_back(span);
      span_total += std::abs(span);
    }
    const auto completeness_error = [&](std::size_t steps) {
      double defect = 0.0;
      for (std::size_t p = 0; p < points.size(); ++p)
        defect += std::abs(sum(integrated_gradients_raw(model, points[p], target, steps)) -
                           spans[p]);
      return defect / span_total;
    };
    const double coarse = completeness_error(10);
    const double fine = completeness_error(300);
    worst_final = std::max(worst_final, fine);
    if (fine >= coarse && coarse > 0.0) decreased_everywhere = false;
  }
  result.passed = worst_final < tolerance && decreased_everywhere;
  result.detail = "max completeness error " + detail::format_number(worst_final) + " at 300 steps (tolerance " +
                  detail::format_number(tolerance) + "); error(300) < error(10) " +
                  (decreased_everywhere ? "on every net" : "VIOLATED");
  return result;
}

inline CheckResult check_lrp_conservation(const ValidationOptions& options) {
  CheckResult result{"lrp-conservation", true, ""};
  const double tolerance = 1e-4;
  double worst = 0.0;
  Rng root(options.seed);
  for (std::size_t i = 0; i < options.net_count; ++i) {
    Rng rng = root.fork(300 + i);
    const auto model = detail::oracle_net<double>(rng, i, true);
    const std::size_t target = rng.uniform_index(detail::prelogit_count(model));
    const Tensor<double> x = detail::sample_clean_input(model, rng, target, 1e-9, 1e-3);
    const Tensor<double> raw = lrp_raw(model, x, target, 0.0);
    const double a_target = prelogit_value(model, x, target);
    worst = std::max(worst, std::abs(sum(raw) - a_target) / std::abs(a_target));
  }
  result.passed = worst < tolerance;
  result.detail = "max conservation error " + detail::format_number(worst) + " (tolerance " +
                  detail::format_number(tolerance) + ") on zero-bias nets";
  return result;
}

inline CheckResult check_gi_lrp_equivalence(const ValidationOptions& options) {
  CheckResult result{"gi-lrp-z", true, ""};
  const double tolerance = 1e-5;
  double worst = 0.0;
  Rng root(options.seed);
  for (std::size_t i = 0; i < options.net_count; ++i) {
    // same fork label as the conservation check: the equivalence claim is
    // asserted on that zero-bias family
    Rng rng = root.fork(300 + i);
    const auto model = detail::oracle_net<double>(rng, i, true);
    const std::size_t target = rng.uniform_index(detail::prelogit_count(model));
    const Tensor<double> x = detail::sample_clean_input(model, rng, target, 1e-9, 1e-3);
    const Tensor<double> gi = gradient_times_input_raw(model, x, target);
    const Tensor<double> lrp = lrp_raw(model, x, target, 0.0);
    worst = std::max(worst, detail::relative_difference(gi, lrp));
  }

  // biased counterexample: the equivalence must visibly break
  const auto model = detail::biased_equivalence_counterexample();
  Tensor<double> x = Tensor<double>::zeros({1, 2, 2});
  x[0] = 2.0;
  x[2] = 2.0;  // pre-pool values [1,-1,1,-1] average to exactly zero
  const double gap = detail::relative_difference(gradient_times_input_raw(model, x, 0),
                                                 lrp_raw(model, x, 0, 0.0));
  const bool breaks = gap > 1e-2;
  result.passed = worst < tolerance && breaks;
  result.detail = "max bias-free difference " + detail::format_number(worst) + " (tolerance " +
                  detail::format_number(tolerance) + "); biased counterexample difference " +
                  detail::format_number(gap) + (breaks ? " (> 0.01 as documented)" : " TOO SMALL");
  return result;
}

inline CheckResult check_gbp_negclamp(const ValidationOptions& options) {
  CheckResult result{"gbp-negclamp", true, ""};
  double most_negative = 0.0;
  Rng root(options.seed);
  for (std::size_t i = 0; i < 5; ++i) {
    Rng rng = root.fork(500 + i);
    const auto model = make_random_net<double>(rng, detail::oracle_net_options(i, false));
    Tensor<double> x = Tensor<double>::zeros(model.input_shape);
    for (std::size_t p = 0; p < x.size(); ++p) x[p] = rng.uniform(-1.0, 1.0);
    const GradientMode mode = options.fault == FaultInjection::gbp_skip_clamp
                                  ? GradientMode::plain
                                  : GradientMode::guided;
    BackpropProbe<double> probe;
    input_gradient(model, x, 0, mode, &probe);
    for (const auto& [node_id, outflow] : probe.relu_outflow)
      for (std::size_t p = 0; p < outflow.size(); ++p)
        most_negative = std::min(most_negative, outflow[p]);
  }
  result.passed = most_negative >= 0.0;
  result.detail = std::string("most negative value leaving any ReLU under guided rules: ") +
                  detail::format_number(most_negative);
  return result;
}

inline std::vector<CheckResult> run_validation(const ValidationOptions& options) {
  const auto wanted = [&](const std::string& name) {
    if (options.only.empty()) return true;
    for (const auto& n : options.only)
      if (n == name) return true;
    return false;
  };
  for (const auto& name : options.only) {
    bool known = false;
    for (const auto& k : list_checks()) known = known || k == name;
    if (!known)
      raise(ErrorKind::invalid_argument,
            "unknown check '" + name + "'; available: gradcheck ig-completeness lrp-conservation "
                                       "gi-lrp-z gbp-negclamp");
  }
  std::vector<CheckResult> results;
  if (wanted("gradcheck")) results.push_back(check_gradcheck(options));
  if (wanted("ig-completeness")) results.push_back(check_ig_completeness(options));
  if (wanted("lrp-conservation")) results.push_back(check_lrp_conservation(options));
  if (wanted("gi-lrp-z")) results.push_back(check_gi_lrp_equivalence(options));
  if (wanted("gbp-negclamp")) results.push_back(check_gbp_negclamp(options));
  return results;
}

}  // namespace attrikit
