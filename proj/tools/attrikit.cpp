// attrikit: train small CNNs on synthetic leaf-lesion images, run pixel
// attribution methods over them, and score the results against the lesion
// masks.  Every subcommand is deterministic given --seed.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "attrikit/attribution.hpp"
#include "attrikit/autodiff.hpp"
#include "attrikit/evalkit.hpp"
#include "attrikit/graph.hpp"
#include "attrikit/image.hpp"
#include "attrikit/model_io.hpp"
#include "attrikit/synthetic.hpp"
#include "attrikit/trainer.hpp"
#include "attrikit/validate.hpp"
#include "attrikit/zoo.hpp"

namespace fs = std::filesystem;
using namespace attrikit;

namespace {

// --- shared plumbing ---

fs::path resolve_out_dir(const std::string& out_flag) {
  std::string dir = out_flag;
  if (dir.empty()) {
    const char* env = std::getenv("ATTRIKIT_OUT");
    dir = env != nullptr && *env != '\0' ? env : ".";
  }
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string::npos) end = csv.size();
    const std::string item = csv.substr(start, end - start);
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

/// Parse --methods into the canonical panel order, whatever order was given.
std::vector<Method> parse_methods(const std::string& csv) {
  if (csv.empty() || csv == "all") return all_methods();
  std::vector<bool> wanted(all_methods().size(), false);
  for (const auto& name : split_csv(csv))
    wanted[static_cast<std::size_t>(method_from_name(name))] = true;
  std::vector<Method> out;
  for (Method m : all_methods())
    if (wanted[static_cast<std::size_t>(m)]) out.push_back(m);
  return out;
}

struct MethodFlags {
  std::string methods = "all";
  std::size_t steps = 300;
  std::size_t sg_samples = 50;
  std::string sg_sigma = "auto";
  double epsilon = 0.01;
  std::string baseline = "zeros";
  std::string norm_mode = "abs_minmax";

  void attach(CLI::App* cmd) {
    cmd->add_option("--methods", methods,
                    "Comma-separated method names, or 'all' "
                    "(saliency,gi,gbp,sg,ig,dtd,lrp-z,lrp-eps)");
    cmd->add_option("--steps", steps, "Integration steps for ig");
    cmd->add_option("--sg-samples", sg_samples, "Noise samples for sg");
    cmd->add_option("--sg-sigma", sg_sigma,
                    "Noise stddev for sg in input units, or 'auto' (0.15 * input range)");
    cmd->add_option("--epsilon", epsilon, "Stabilizer for lrp-eps");
    cmd->add_option("--baseline", baseline, "Baseline preset for ig (built-in: zeros)");
    cmd->add_option("--norm-mode", norm_mode,
                    "Map normalization: abs_minmax or signed_minmax");
  }

  MethodParams params(std::uint64_t seed) const {
    MethodParams p;
    p.ig_steps = steps;
    p.ig_baseline = baseline;
    p.sg_samples = sg_samples;
    if (sg_sigma != "auto") {
      try {
        p.sg_sigma = std::stod(sg_sigma);
      } catch (const std::exception&) {
        raise(ErrorKind::invalid_argument, "--sg-sigma expects a number or 'auto'");
      }
    }
    p.sg_seed = seed;
    p.lrp_epsilon = epsilon;
    return p;
  }
};

/// Textual manifest rows (paths kept verbatim), index-aligned with
/// load_manifest()'s samples.
struct ManifestRow {
  std::size_t line_no = 0;
  std::string image;
  std::string label;
  std::string mask;  // empty when the column is absent
};

std::vector<ManifestRow> read_manifest_rows(const fs::path& manifest_path) {
  const std::string text = read_text_file(manifest_path);
  std::vector<ManifestRow> rows;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    ManifestRow row;
    row.line_no = line_no;
    if (!fields.empty()) row.image = fields[0];
    if (fields.size() > 1) row.label = fields[1];
    if (fields.size() > 2) row.mask = fields[2];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string row_stem(const ManifestRow& row) { return fs::path(row.image).stem().string(); }

std::string format_value(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Load model + weights, fold batchnorm into the neighboring linear layers
/// (exact at inference time; required by the relevance methods), and cast to
/// f64 for the attribution math.
ModelGraph<double> load_attribution_model(const std::string& model_path,
                                          const std::string& weights_path) {
  const ModelGraph<float> loaded = load_model_files(model_path, weights_path);
  return cast_model<double>(fold_batchnorm(loaded));
}

std::size_t auto_topk(const AnnotationMask& mask, std::size_t pixels, std::size_t flag_value) {
  if (flag_value > 0) return std::min(flag_value, pixels);
  if (!mask.empty()) return mask.area();
  return std::max<std::size_t>(1, pixels / 20);
}

// --- subcommands ---

struct GenerateArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t samples_per_class = 100;
  std::size_t image_size = 32;
};

int cmd_generate(const GenerateArgs& args) {
  SyntheticDatasetSpec spec = SyntheticDatasetSpec::default_three_class();
  spec.seed = args.seed;
  spec.samples_per_class = args.samples_per_class;
  spec.image_size = args.image_size;
  const auto dataset = generate_synthetic(spec);
  std::vector<std::string> names;
  for (const auto& cls : spec.classes) names.push_back(cls.name);
  const fs::path out = resolve_out_dir(args.out);
  save_dataset(dataset, out, names);
  std::printf("wrote %zu images (%zu classes) under %s\n", dataset.size(), spec.classes.size(),
              out.string().c_str());
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double val_fraction = 0.10;
  std::size_t patience = 20;
  bool resplit = false;
};

int cmd_train(const TrainArgs& args) {
  const auto dataset = load_manifest(args.manifest);
  std::size_t num_classes = 0;
  for (const auto& s : dataset) num_classes = std::max(num_classes, s.label + 1);
  const std::size_t image_size = dataset.front().image.extent(1);
  const ModelGraph<float> blueprint = reference_cnn<float>(num_classes, image_size);

  TrainConfig config;
  config.seed = args.seed;
  config.max_epochs = args.epochs;
  config.batch_size = args.batch_size;
  config.learning_rate = args.learning_rate;
  config.validation_fraction = args.val_fraction;
  config.early_stop_patience = args.patience;
  config.resplit_each_epoch = args.resplit;

  const TrainResult<float> result = train(blueprint, dataset, config);

  const fs::path out = resolve_out_dir(args.out);
  save_model_files(result.model, out / "model.json", out / "model.weights");
  write_text_file(out / "history.csv", history_to_text(result.history));
  std::printf("trained %zu epochs; best epoch %zu with validation accuracy %.4f\n",
              result.history.size(), result.best_epoch, result.best_val_accuracy);
  std::printf("model digest %s; files under %s\n", model_digest(result.model).c_str(),
              out.string().c_str());
  return 0;
}

struct PredictArgs {
  std::string model, weights, manifest, out;
};

int cmd_predict(const PredictArgs& args) {
  const ModelGraph<float> model = load_model_files(args.model, args.weights);
  const auto dataset = load_manifest(args.manifest);
  const auto rows = read_manifest_rows(args.manifest);
  const fs::path out = resolve_out_dir(args.out);

  std::vector<std::size_t> labels, predictions;
  std::string report = "image,label,predicted,correct\n";
  std::size_t num_classes = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto pred = predict(model, dataset[i].image);
    labels.push_back(dataset[i].label);
    predictions.push_back(pred.class_index);
    num_classes = std::max({num_classes, dataset[i].label + 1, pred.class_index + 1});
    report += rows[i].image + "," + std::to_string(dataset[i].label) + "," +
              std::to_string(pred.class_index) + "," +
              (pred.class_index == dataset[i].label ? "1" : "0") + "\n";
  }
  write_text_file(out / "predictions.csv", report);

  const ConfusionMatrix cm = confusion_matrix(labels, predictions, num_classes);
  write_text_file(out / "confusion.txt", confusion_to_text(cm));
  save_png(out / "confusion.png", render_confusion(cm));
  std::printf("accuracy %.4f over %zu images; reports under %s\n", cm.accuracy(), dataset.size(),
              out.string().c_str());
  return 0;
}

struct ExplainArgs {
  std::string model, weights, manifest, out;
  std::uint64_t seed = 0;
  MethodFlags flags;
  std::size_t scale = 4;
};

int cmd_explain(const ExplainArgs& args) {
  const std::vector<Method> methods = parse_methods(args.flags.methods);
  const NormMode norm = norm_mode_from_name(args.flags.norm_mode);
  const MethodParams params = args.flags.params(args.seed);
  const ModelGraph<double> model = load_attribution_model(args.model, args.weights);
  const auto dataset = load_manifest(args.manifest);
  const auto rows = read_manifest_rows(args.manifest);
  const fs::path out = resolve_out_dir(args.out);

  std::string report =
      "image,method,target,predicted,raw_min,raw_max,raw_abs_sum,mass_in_mask,topk_in_mask\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Tensor<double> x = dataset[i].image.cast<double>();
    const auto pred = predict(model, x);
    const std::size_t target = pred.class_index;

    AnnotationMask mask;
    mask.grid = dataset[i].mask;
    const ImageU8 underlay = tensor_to_image(dataset[i].image);
    const std::string stem = row_stem(rows[i]);

    std::vector<ImageU8> tiles;
    for (Method method : methods) {
      const ExplanationMap map = explain(model, x, target, method, params);
      save_explanation_file(map, out / (stem + "_" + method_name(method) + ".expl"));

      const Tensor<float> normalized = normalize_map(map, norm);
      const ImageU8 heat = render_heatmap(normalized, Colormap::red_blue, &underlay,
                                          mask.empty() ? nullptr : &mask.grid);
      const ImageU8 scaled = scale_nearest(heat, args.scale);
      save_png(out / (stem + "_" + method_name(method) + ".png"), scaled);
      tiles.push_back(scaled);

      double abs_sum = 0.0;
      for (std::size_t p = 0; p < map.raw.size(); ++p) abs_sum += std::fabs(map.raw[p]);
      report += rows[i].image;
      report += std::string(",") + method_name(method) + "," + std::to_string(target) + "," +
                std::to_string(pred.class_index) + "," + format_value(min_value(map.raw)) + "," +
                format_value(max_value(map.raw)) + "," + format_value(abs_sum);
      if (!mask.empty()) {
        report += "," + format_value(mass_in_mask(normalized, mask)) + "," +
                  format_value(topk_in_mask(normalized, mask, mask.area()));
      } else {
        report += ",,";
      }
      report += "\n";
    }
    save_png(out / (stem + "_panel.png"), render_panel(tiles));
  }
  write_text_file(out / "explain_report.csv", report);
  std::printf("explained %zu images x %zu methods under %s\n", dataset.size(), methods.size(),
              out.string().c_str());
  return 0;
}

struct CompareArgs {
  std::string model, weights, manifest, out;
  std::uint64_t seed = 0;
  MethodFlags flags;
  std::size_t topk = 0;  // 0 = mask area (or 5% of pixels when maskless)
  double low_factor = 2.0;
  double high_factor = 4.0;
};

int cmd_compare(const CompareArgs& args) {
  const std::vector<Method> methods = parse_methods(args.flags.methods);
  const NormMode norm = norm_mode_from_name(args.flags.norm_mode);
  const MethodParams params = args.flags.params(args.seed);
  const auto rows = read_manifest_rows(args.manifest);

  // every mask referenced by the manifest must exist; list ALL offenders
  const fs::path base = fs::path(args.manifest).parent_path();
  std::string missing;
  for (const auto& row : rows)
    if (!row.mask.empty() && !fs::exists(base / row.mask))
      missing += "\n  line " + std::to_string(row.line_no) + ": " + row.mask;
  if (!missing.empty())
    raise(ErrorKind::io_error, "manifest references missing mask files:" + missing);

  const ModelGraph<double> model = load_attribution_model(args.model, args.weights);
  const auto dataset = load_manifest(args.manifest);
  const fs::path out = resolve_out_dir(args.out);

  std::string agreement = "image,method_a,method_b,spearman,topk_iou\n";
  std::string localization = "image,method,mass_in_mask,topk_in_mask,area_fraction,flag\n";
  std::vector<std::vector<double>> mass_by_method(methods.size());
  double area_fraction_sum = 0.0;
  std::size_t masked_images = 0;
  std::vector<std::string> observation2, observation3;

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Tensor<double> x = dataset[i].image.cast<double>();
    const auto pred = predict(model, x);
    const bool correct = pred.class_index == dataset[i].label;

    AnnotationMask mask;
    mask.grid = dataset[i].mask;
    const std::size_t pixels = dataset[i].mask.size();
    const std::size_t k = auto_topk(mask, pixels, args.topk);

    std::vector<Tensor<float>> normalized;
    for (Method method : methods)
      normalized.push_back(normalize_map(explain(model, x, pred.class_index, method, params), norm));

    for (std::size_t a = 0; a < methods.size(); ++a)
      for (std::size_t b = a + 1; b < methods.size(); ++b) {
        std::string rho;
        try {
          rho = format_value(spearman(normalized[a], normalized[b]));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::undefined_metric) throw;
          rho = "undefined";
        }
        agreement += rows[i].image + "," + method_name(methods[a]) + "," +
                     method_name(methods[b]) + "," + rho + "," +
                     format_value(topk_iou(normalized[a], normalized[b], k)) + "\n";
      }

    if (mask.empty()) continue;  // healthy image: no localization ground truth
    ++masked_images;
    area_fraction_sum += mask.area_fraction();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double mass = 0.0, topk_frac = 0.0;
      std::string mass_text, topk_text;
      try {
        mass = mass_in_mask(normalized[m], mask);
        topk_frac = topk_in_mask(normalized[m], mask, k);
        mass_text = format_value(mass);
        topk_text = format_value(topk_frac);
        mass_by_method[m].push_back(mass);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined_metric) throw;
        mass_text = topk_text = "undefined";
      }
      std::string flag;
      if (!mass_text.empty() && mass_text != "undefined") {
        const double af = mask.area_fraction();
        if (correct && mass < args.low_factor * af) {
          flag = "low-localization";
          observation2.push_back(rows[i].image + ":" + method_name(methods[m]));
        } else if (!correct && mass > args.high_factor * af) {
          flag = "high-localization";
          observation3.push_back(rows[i].image + ":" + method_name(methods[m]));
        }
      }
      localization += rows[i].image + "," + std::string(method_name(methods[m])) + "," +
                      mass_text + "," + topk_text + "," + format_value(mask.area_fraction()) +
                      "," + flag + "\n";
    }
  }

  std::string summary = "[summary]\n";
  summary += "masked_images," + std::to_string(masked_images) + "\n";
  summary += "mean_area_fraction," +
             format_value(masked_images ? area_fraction_sum / masked_images : 0.0) + "\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    auto masses = mass_by_method[m];
    std::string med = "undefined";
    if (!masses.empty()) {
      std::sort(masses.begin(), masses.end());
      const std::size_t n = masses.size();
      med = format_value(n % 2 ? masses[n / 2] : 0.5 * (masses[n / 2 - 1] + masses[n / 2]));
    }
    summary += std::string("median_mass_in_mask,") + method_name(methods[m]) + "," + med + "\n";
  }
  const auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ";" : "") + items[i];
    return s;
  };
  summary += "observation2_candidates," + std::to_string(observation2.size()) + "," +
             join(observation2) + "\n";
  summary += "observation3_candidates," + std::to_string(observation3.size()) + "," +
             join(observation3) + "\n";

  write_text_file(out / "compare_report.txt",
                  "[agreement]\n" + agreement + "[localization]\n" + localization + summary);
  std::printf("compared %zu methods on %zu images (%zu with masks); report under %s\n",
              methods.size(), dataset.size(), masked_images, out.string().c_str());
  return 0;
}

struct ValidateArgs {
  std::uint64_t seed = 20240917;
  std::size_t nets = 20;
  bool list = false;
  std::string only;
  bool break_gbp_clamp = false;
};

int cmd_validate(const ValidateArgs& args) {
  if (args.list) {
    for (const auto& name : list_checks()) std::printf("%s\n", name.c_str());
    return 0;
  }
  ValidationOptions options;
  options.seed = args.seed;
  options.net_count = args.nets;
  options.only = split_csv(args.only);
  options.fault =
      args.break_gbp_clamp ? FaultInjection::gbp_skip_clamp : FaultInjection::none;
  bool all_passed = true;
  for (const CheckResult& r : run_validation(options)) {
    std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all_passed = all_passed && r.passed;
  }
  return all_passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attrikit: inference, pixel attribution, and attribution scoring for small CNNs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write the synthetic leaf-lesion dataset");
  generate->add_option("--out", gen.out, "Output directory (default $ATTRIKIT_OUT or .)");
  generate->add_option("--seed", gen.seed, "Dataset seed");
  generate->add_option("--samples-per-class", gen.samples_per_class, "Images per class");
  generate->add_option("--image-size", gen.image_size, "Square image size in pixels");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the reference CNN on a manifest");
  train_cmd->add_option("--manifest", tr.manifest, "Dataset manifest CSV")->required();
  train_cmd->add_option("--out", tr.out, "Output directory (default $ATTRIKIT_OUT or .)");
  train_cmd->add_option("--seed", tr.seed, "Init/shuffle seed");
  train_cmd->add_option("--epochs", tr.epochs, "Maximum epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "Minibatch size");
  train_cmd->add_option("--learning-rate", tr.learning_rate, "Adam learning rate");
  train_cmd->add_option("--val-fraction", tr.val_fraction, "Held-out validation fraction");
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience in epochs");
  train_cmd->add_flag("--resplit-each-epoch", tr.resplit, "Redraw the split every epoch");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Classify a manifest and report confusion");
  predict_cmd->add_option("--model", pr.model, "Model document (JSON)")->required();
  predict_cmd->add_option("--weights", pr.weights, "Weights blob")->required();
  predict_cmd->add_option("--manifest", pr.manifest, "Dataset manifest CSV")->required();
  predict_cmd->add_option("--out", pr.out, "Output directory (default $ATTRIKIT_OUT or .)");

  ExplainArgs ex;
  auto* explain_cmd = app.add_subcommand("explain", "Write attribution maps, heatmaps, and panels");
  explain_cmd->add_option("--model", ex.model, "Model document (JSON)")->required();
  explain_cmd->add_option("--weights", ex.weights, "Weights blob")->required();
  explain_cmd->add_option("--manifest", ex.manifest, "Dataset manifest CSV")->required();
  explain_cmd->add_option("--out", ex.out, "Output directory (default $ATTRIKIT_OUT or .)");
  explain_cmd->add_option("--seed", ex.seed, "Seed (drives sg noise)");
  explain_cmd->add_option("--heatmap-scale", ex.scale, "Integer upscale factor for PNGs");
  ex.flags.attach(explain_cmd);

  CompareArgs cp;
  auto* compare_cmd =
      app.add_subcommand("compare", "Score method agreement and lesion localization");
  compare_cmd->add_option("--model", cp.model, "Model document (JSON)")->required();
  compare_cmd->add_option("--weights", cp.weights, "Weights blob")->required();
  compare_cmd->add_option("--manifest", cp.manifest, "Dataset manifest CSV")->required();
  compare_cmd->add_option("--out", cp.out, "Output directory (default $ATTRIKIT_OUT or .)");
  compare_cmd->add_option("--seed", cp.seed, "Seed (drives sg noise)");
  compare_cmd->add_option("--topk", cp.topk, "Pixel count for top-k metrics (0 = mask area)");
  compare_cmd->add_option("--low-factor", cp.low_factor,
                          "Flag correct images with mass_in_mask below this multiple of the "
                          "mask area fraction");
  compare_cmd->add_option("--high-factor", cp.high_factor,
                          "Flag misclassified images with mass_in_mask above this multiple");
  cp.flags.attach(compare_cmd);

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "Run the built-in oracle suites");
  validate_cmd->add_option("--seed", va.seed, "Random-net seed");
  validate_cmd->add_option("--nets", va.nets, "Random nets per suite");
  validate_cmd->add_flag("--list", va.list, "Print check names without running");
  validate_cmd->add_option("--only", va.only, "Comma-separated subset of checks");
  validate_cmd->add_flag("--break-gbp-clamp", va.break_gbp_clamp,
                         "Fault injection: drop the guided-backprop negative clamp");

  ValidateArgs gc;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient check (validate subset)");
  gradcheck_cmd->add_option("--seed", gc.seed, "Random-net seed");
  gradcheck_cmd->add_option("--nets", gc.nets, "Random nets to check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(gen);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (predict_cmd->parsed()) return cmd_predict(pr);
    if (explain_cmd->parsed()) return cmd_explain(ex);
    if (compare_cmd->parsed()) return cmd_compare(cp);
    if (validate_cmd->parsed()) return cmd_validate(va);
    if (gradcheck_cmd->parsed()) {
      gc.only = "gradcheck";
      return cmd_validate(gc);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
