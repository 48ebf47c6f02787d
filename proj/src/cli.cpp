#include "mca/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mca/augment.hpp"
#include "mca/bench.hpp"
#include "mca/checkpoint.hpp"
#include "mca/colorspace.hpp"
#include "mca/data.hpp"
#include "mca/metrics.hpp"
#include "mca/trainer.hpp"

namespace mca::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

VideoShape parse_shape(const std::string& text) {
  std::vector<Index> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      dims.push_back(std::stol(part));
    } catch (const std::exception&) {
      throw UsageError("bad shape '" + text + "', expected T,C,H,W");
    }
  }
  if (dims.size() != 4) throw UsageError("bad shape '" + text + "', expected T,C,H,W");
  return {dims[0], dims[1], dims[2], dims[3]};
}

// ---------------------------------------------------------------------------
// train configuration: flat JSON file overlaid by explicitly given flags
// ---------------------------------------------------------------------------

struct TrainInvocation {
  TrainConfig train;
  std::string data;
  int classes = 0;  // 0: read from the manifest or the labels
};

json to_json(const TrainInvocation& inv) {
  const TrainConfig& c = inv.train;
  json j;
  j["data"] = inv.data;
  j["classes"] = inv.classes;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["lambda_av"] = c.lambda_av;
  j["rho"] = c.rho;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["av_bidirectional"] = c.av_bidirectional;
  j["conv1_channels"] = c.conv1_channels;
  j["conv2_channels"] = c.conv2_channels;
  return j;
}

void apply_json(TrainInvocation& inv, const json& j) {
  if (!j.is_object()) throw UsageError("config must be a flat JSON object");
  TrainConfig& c = inv.train;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "data") inv.data = value.get<std::string>();
      else if (key == "classes") inv.classes = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "momentum") c.momentum = value.get<double>();
      else if (key == "lambda_av") c.lambda_av = value.get<double>();
      else if (key == "rho") c.rho = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "mode") c.mode = parse_ablation_mode(value.get<std::string>());
      else if (key == "av_bidirectional") c.av_bidirectional = value.get<bool>();
      else if (key == "conv1_channels") c.conv1_channels = value.get<int>();
      else if (key == "conv2_channels") c.conv2_channels = value.get<int>();
      else throw UsageError("unknown config key '" + key + "'");
    } catch (const json::type_error&) {
      throw UsageError("config key '" + key + "' has the wrong type");
    }
  }
}

int classes_from(const fs::path& data_dir, const Dataset& train) {
  const fs::path manifest = data_dir / "manifest.json";
  if (fs::exists(manifest)) {
    const json j = read_json_file(manifest);
    if (j.contains("classes")) return j["classes"].get<int>();
  }
  int top = 0;
  for (int l : train.labels) top = std::max(top, l);
  return top + 1;
}

Dataset load_split(const fs::path& dir, bool required) {
  if (!fs::exists(dir)) {
    if (required) throw IoError("missing data split " + dir.string());
    return {};
  }
  return load_mcav_dir(dir);
}

// ---------------------------------------------------------------------------

void add_gen_data(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("gen-data", "Generate the MotionShapes dataset");
  auto cfg = std::make_shared<MotionShapesConfig>();
  auto dir = std::make_shared<std::string>();
  auto counts = std::make_shared<std::string>("3000,600");
  auto size = std::make_shared<int>(32);
  cmd->add_option("--out", *dir, "Output directory")->required();
  cmd->add_option("--kappa", cfg->kappa, "Probability a clip carries its class hue")->capture_default_str();
  cmd->add_option("--seed", cfg->seed, "Generator seed")->capture_default_str();
  cmd->add_option("--classes", cfg->classes, "Number of motion classes (2-6)")->capture_default_str();
  cmd->add_option("--frames", cfg->frames, "Frames per clip")->capture_default_str();
  cmd->add_option("--size", *size, "Frame height and width")->capture_default_str();
  cmd->add_option("--counts", *counts, "train,val clip counts")->capture_default_str();
  cmd->callback([=, &out, &err] {
    std::stringstream ss(*counts);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) throw UsageError("--counts expects train,val");
    try {
      cfg->train_count = std::stoi(a);
      cfg->val_count = std::stoi(b);
    } catch (const std::exception&) {
      throw UsageError("--counts expects two integers");
    }
    cfg->height = cfg->width = *size;
    cfg->validate();
    json resolved{{"out", *dir},     {"kappa", cfg->kappa}, {"seed", cfg->seed},    {"classes", cfg->classes},
                  {"frames", cfg->frames}, {"size", *size},       {"counts", *counts}};
    err << "gen-data config: " << resolved.dump() << '\n';
    const MotionShapesData data = generate_motionshapes(*cfg);
    fs::create_directories(*dir);
    write_motionshapes(data, *cfg, *dir);
    out << "wrote " << data.train.size() << " train, " << data.val.size() << " val, " << data.val_hueshift.size()
        << " val_hueshift clips to " << *dir << '\n';
  });
}

void add_augment(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("augment", "Augment one MCAV clip");
  struct Opts {
    std::string in, out, op = "swapmix", perm;
    std::uint64_t seed = 0;
    double alpha = 1.0;
    std::optional<double> lambda;
    double delta_h = 0.0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--in", o->in, "Input .mcav clip")->required();
  cmd->add_option("--out", o->out, "Output .mcav clip")->required();
  cmd->add_option("--op", o->op, "swapmix | channel-swap | hue")
      ->check(CLI::IsMember({"swapmix", "channel-swap", "hue"}))
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for the permutation and lambda draws")->capture_default_str();
  cmd->add_option("--alpha", o->alpha, "Beta(alpha, alpha) shape for lambda")->capture_default_str();
  cmd->add_option("--lambda", o->lambda, "Fixed mixing coefficient (overrides the draw)");
  cmd->add_option("--perm", o->perm, "Fixed channel order such as GRB (overrides the draw)");
  auto* delta = cmd->add_option("--delta-h", o->delta_h, "Hue shift in degrees for --op hue (default: random)");
  cmd->callback([=, &out, &err] {
    LabeledVideo clip = read_mcav(o->in);
    Rng rng(o->seed);
    SwapMixDraw draw = sample_swap_mix(rng, o->alpha);
    if (!o->perm.empty()) draw.phi = Permutation::parse(o->perm);
    if (o->lambda) draw.mix.lambda = *o->lambda;
    const VideoF v = to_float(clip.video);
    VideoF result;
    json resolved{{"in", o->in}, {"out", o->out}, {"op", o->op}, {"seed", o->seed}, {"alpha", o->alpha}};
    if (o->op == "swapmix") {
      result = swap_mix(v, draw.phi, draw.mix);
      resolved["perm"] = draw.phi.name();
      resolved["lambda"] = draw.mix.lambda;
    } else if (o->op == "channel-swap") {
      result = channel_swap(v, draw.phi);
      resolved["perm"] = draw.phi.name();
    } else if (o->op == "hue") {
      const double d = delta->count() ? o->delta_h : std::uniform_real_distribution<double>(-180.0, 180.0)(rng);
      result = hue_jitter(v, static_cast<float>(d));
      resolved["delta_h"] = d;
    } else {
      throw UsageError("unknown --op '" + o->op + "'");
    }
    err << "augment config: " << resolved.dump() << '\n';
    write_mcav(to_u8(result), clip.label, o->out);
    out << "wrote " << o->out << '\n';
  });
}

void add_train(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("train", "Train the clip classifier");
  struct Opts {
    std::string config, out_dir, data, mode;
    int classes = 0, epochs = 0, batch_size = 0;
    double lr = 0, momentum = 0, lambda_av = 0, rho = 0, alpha = 0;
    std::uint64_t seed = 0;
    bool bidirectional = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--config", o->config, "Flat JSON config file");
  cmd->add_option("--out", o->out_dir, "Output directory")->required();
  auto* f_data = cmd->add_option("--data", o->data, "Dataset directory with train/, val/, val_hueshift/");
  auto* f_classes = cmd->add_option("--classes", o->classes, "Number of classes");
  auto* f_epochs = cmd->add_option("--epochs", o->epochs);
  auto* f_batch = cmd->add_option("--batch-size", o->batch_size);
  auto* f_lr = cmd->add_option("--lr", o->lr, "Base learning rate");
  auto* f_mom = cmd->add_option("--momentum", o->momentum);
  auto* f_lav = cmd->add_option("--lambda-av", o->lambda_av, "Weight of the alignment loss");
  auto* f_rho = cmd->add_option("--rho", o->rho, "Per-iteration augmentation probability");
  auto* f_alpha = cmd->add_option("--alpha", o->alpha, "Beta(alpha, alpha) shape");
  auto* f_seed = cmd->add_option("--seed", o->seed);
  auto* f_mode = cmd->add_option("--mode", o->mode,
                                 "baseline | channel-swap-ce | swapmix-ce | expand-set | mca-plus-ce-tilde | mca");
  auto* f_bi = cmd->add_flag("--av-bidirectional", o->bidirectional, "Let the alignment loss reach the clean branch");

  cmd->callback([=, &out, &err] {
    TrainInvocation inv;
    if (!o->config.empty()) apply_json(inv, read_json_file(o->config));
    if (f_data->count()) inv.data = o->data;
    if (f_classes->count()) inv.classes = o->classes;
    if (f_epochs->count()) inv.train.epochs = o->epochs;
    if (f_batch->count()) inv.train.batch_size = o->batch_size;
    if (f_lr->count()) inv.train.learning_rate = o->lr;
    if (f_mom->count()) inv.train.momentum = o->momentum;
    if (f_lav->count()) inv.train.lambda_av = o->lambda_av;
    if (f_rho->count()) inv.train.rho = o->rho;
    if (f_alpha->count()) inv.train.alpha = o->alpha;
    if (f_seed->count()) inv.train.seed = o->seed;
    if (f_mode->count()) inv.train.mode = parse_ablation_mode(o->mode);
    if (f_bi->count()) inv.train.av_bidirectional = o->bidirectional;
    if (inv.data.empty()) throw UsageError("train needs a dataset (--data or \"data\" in the config)");
    inv.train.validate();

    const fs::path data_dir = inv.data;
    const Dataset train = load_split(data_dir / "train", true);
    const Dataset val = load_split(data_dir / "val", false);
    const Dataset val_hueshift = load_split(data_dir / "val_hueshift", false);
    if (inv.classes == 0) inv.classes = classes_from(data_dir, train);

    const fs::path out_dir = o->out_dir;
    fs::create_directories(out_dir);
    const std::string resolved = to_json(inv).dump(2);
    write_text(out_dir / "config.json", resolved + "\n");
    err << "train config: " << to_json(inv).dump() << '\n';

    const TrainResult result = run_training(inv.train, train, val, val_hueshift, inv.classes, [&](const EpochLog& e) {
      err << "epoch " << e.epoch << " train_acc " << e.train_acc << " train_ce " << e.train_ce << " av_loss "
          << e.av_loss << " val_acc " << e.val_acc << " val_acc_hueshift " << e.val_acc_hueshift << '\n';
    });
    save_checkpoint(result.net, out_dir / "checkpoint.bin");
    write_log_csv(result.log, out_dir / "train_log.csv");
    out << format_log_csv(result.log);
  });
}

void add_eval(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a directory of clips");
  struct Opts {
    std::string checkpoint, data, out_dir, augment = "none";
    std::uint64_t seed = 0;
    double alpha = 1.0;
    int bins = kDefaultEceBins;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--checkpoint", o->checkpoint)->required();
  cmd->add_option("--data", o->data, "Directory of .mcav clips")->required();
  cmd->add_option("--out", o->out_dir, "Output directory")->required();
  cmd->add_option("--augment", o->augment, "none | swapmix | channel-swap | hue, applied to every clip")
      ->check(CLI::IsMember({"none", "swapmix", "channel-swap", "hue"}))
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for the augmentation stream")->capture_default_str();
  cmd->add_option("--alpha", o->alpha)->capture_default_str();
  cmd->add_option("--bins", o->bins, "ECE bins")->capture_default_str();
  cmd->callback([=, &out, &err] {
    const SmallNet<float> net = load_checkpoint(o->checkpoint);
    Dataset data = load_mcav_dir(o->data);
    if (data.empty()) throw IoError("no .mcav clips in " + o->data);

    Augmentation aug;
    if (o->augment == "none") aug = identity_augmentation();
    else if (o->augment == "swapmix") aug = swap_mix_augmentation(o->alpha);
    else if (o->augment == "channel-swap") aug = channel_swap_augmentation();
    else if (o->augment == "hue") aug = hue_jitter_augmentation();
    else throw UsageError("unknown --augment '" + o->augment + "'");
    if (o->augment != "none") {
      Rng rng(o->seed);
      for (auto& v : data.videos) v = to_u8(aug(to_float(v), rng));
    }
    json resolved{{"checkpoint", o->checkpoint}, {"data", o->data}, {"augment", o->augment},
                  {"seed", o->seed},             {"alpha", o->alpha}, {"bins", o->bins}};
    err << "eval config: " << resolved.dump() << '\n';

    const EvalResult r = evaluate(net, data);
    const fs::path out_dir = o->out_dir;
    fs::create_directories(out_dir);
    write_predictions_csv(r.predictions, out_dir / "predictions.csv");
    json summary = resolved;
    summary["samples"] = data.size();
    summary["accuracy"] = r.accuracy;
    summary["mean_loss"] = r.mean_loss;
    summary["ece"] = ece(r.predictions, o->bins);
    write_text(out_dir / "eval.json", summary.dump(2) + "\n");
    out << summary.dump(2) << '\n';
  });
}

void add_metrics(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("metrics", "Accuracy, ECE, affinity and diversity from prediction dumps");
  struct Opts {
    std::string predictions, augmented, out_file;
    std::optional<double> loss_aug, loss_clean;
    int bins = kDefaultEceBins;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--predictions", o->predictions, "Prediction dump on the clean set")->required();
  cmd->add_option("--augmented", o->augmented, "Prediction dump on the augmented set (enables affinity)");
  cmd->add_option("--loss-aug", o->loss_aug, "Final training loss of the augmentation-trained model");
  cmd->add_option("--loss-clean", o->loss_clean, "Final training loss of the clean-trained model");
  cmd->add_option("--bins", o->bins, "ECE bins")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Accepted for uniformity; metrics are deterministic");
  cmd->add_option("--out", o->out_file, "Write the JSON report here as well");
  cmd->callback([=, &out, &err] {
    if (o->loss_aug.has_value() != o->loss_clean.has_value()) {
      throw UsageError("--loss-aug and --loss-clean must be given together");
    }
    const PredictionDump clean = read_predictions_csv(o->predictions);
    MetricsReport report;
    report.predictions = o->predictions;
    report.accuracy = accuracy(clean);
    report.ece_bins = o->bins;
    report.ece = ece(clean, o->bins);
    if (!o->augmented.empty()) {
      const PredictionDump aug = read_predictions_csv(o->augmented);
      report.augmented_predictions = o->augmented;
      report.augmented_accuracy = accuracy(aug);
      report.affinity = affinity_ratio(*report.augmented_accuracy, report.accuracy);
    }
    if (o->loss_aug) {
      report.loss_augmented_trained = *o->loss_aug;
      report.loss_clean_trained = *o->loss_clean;
      report.diversity = diversity(*o->loss_aug, *o->loss_clean);
    }
    const std::string text = report.to_json();
    err << "metrics config: "
        << json{{"predictions", o->predictions}, {"augmented", o->augmented}, {"bins", o->bins}, {"seed", o->seed}}
               .dump()
        << '\n';
    if (!o->out_file.empty()) write_text(o->out_file, text + "\n");
    out << text << '\n';
  });
}

void add_bench(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("bench", "Time hue jittering against SwapMix");
  struct Opts {
    std::vector<std::string> shapes;
    int runs = kDefaultBenchRuns;
    int warmup = kDefaultBenchWarmup;
    std::uint64_t seed = 0;
    std::string out_dir;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--shape", o->shapes, "T,C,H,W (repeatable; default: three standard shapes)");
  cmd->add_option("--runs", o->runs)->capture_default_str();
  cmd->add_option("--warmup", o->warmup)->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for the benchmark input")->capture_default_str();
  cmd->add_option("--out", o->out_dir, "Write bench.json here instead of printing it");
  cmd->callback([=, &out, &err] {
    std::vector<std::string> shapes = o->shapes;
    if (shapes.empty()) shapes = {"8,3,112,112", "8,3,224,224", "16,3,224,224"};
    json resolved{{"shapes", shapes}, {"runs", o->runs}, {"warmup", o->warmup}, {"seed", o->seed}};
    err << "bench config: " << resolved.dump() << '\n';
    std::vector<HueVsSwapMix> results;
    for (const auto& s : shapes) results.push_back(bench_hue_vs_swapmix(parse_shape(s), o->runs, o->warmup, o->seed));
    const std::string report = to_json(results);
    out << format_table(results);
    if (o->out_dir.empty()) {
      out << report << '\n';
    } else {
      fs::create_directories(o->out_dir);
      write_text(fs::path(o->out_dir) / "bench.json", report + "\n");
      out << "wrote " << (fs::path(o->out_dir) / "bench.json").string() << '\n';
    }
  });
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion-coherent augmentation toolkit", "mca"};
  app.require_subcommand(1);
  add_gen_data(app, out, err);
  add_augment(app, out, err);
  add_train(app, out, err);
  add_eval(app, out, err);
  add_metrics(app, out, err);
  add_bench(app, out, err);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace mca::cli
