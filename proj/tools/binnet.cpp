// binnet: train, evaluate and benchmark binary-weight networks.
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "binnet/bench.hpp"
#include "binnet/checkpoint.hpp"
#include "binnet/common.hpp"
#include "binnet/data_io.hpp"
#include "binnet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMetricsHeader =
    "epoch,learn_time_s,infer_time_per_image_s,train_acc,val_acc";

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string metrics_csv_row(const binnet::MetricsRecord& r) {
  return std::to_string(r.epoch) + "," + fmt_g(r.learn_time_s) + "," +
         fmt_g(r.infer_time_per_image_s) + "," + fmt_g(r.train_acc) + "," +
         fmt_g(r.val_acc);
}

std::string iso8601_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string file_checksum_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw binnet::IoError("cannot open " + path + " for checksum");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = binnet::fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

binnet::Regularizer parse_regularizer(const std::string& name) {
  if (name == "none") return binnet::Regularizer::kNone;
  if (name == "det" || name == "deterministic")
    return binnet::Regularizer::kDeterministic;
  if (name == "stoch" || name == "stochastic")
    return binnet::Regularizer::kStochastic;
  throw binnet::DomainError("unknown regularizer '" + name + "'");
}

const char* regularizer_name(binnet::Regularizer reg) {
  switch (reg) {
    case binnet::Regularizer::kNone: return "none";
    case binnet::Regularizer::kDeterministic: return "det";
    case binnet::Regularizer::kStochastic: return "stoch";
  }
  return "?";
}

binnet::Dataset take_prefix(binnet::Dataset ds, std::int64_t limit) {
  if (limit <= 0 || limit >= ds.count()) return ds;
  const auto& s = ds.images.shape();
  binnet::Tensor images({limit, s[1], s[2], s[3]});
  std::copy_n(ds.images.data(), images.numel(), images.data());
  ds.images = std::move(images);
  ds.labels.resize(static_cast<std::size_t>(limit));
  return ds;
}

struct LoadedData {
  binnet::Dataset train, test;
  std::map<std::string, std::string> checksums;
};

LoadedData load_dataset(const std::string& dataset, const std::string& dir,
                        std::int64_t train_limit, std::int64_t val_limit,
                        bool want_train) {
  LoadedData out;
  if (dataset == "mnist") {
    const auto paths = binnet::mnist_paths(dir);
    if (want_train) {
      out.train = binnet::normalize(
          binnet::load_mnist(paths.train_images, paths.train_labels, "train"));
      out.checksums[paths.train_images] = file_checksum_hex(paths.train_images);
      out.checksums[paths.train_labels] = file_checksum_hex(paths.train_labels);
    }
    out.test = binnet::normalize(
        binnet::load_mnist(paths.test_images, paths.test_labels, "test"));
    out.checksums[paths.test_images] = file_checksum_hex(paths.test_images);
    out.checksums[paths.test_labels] = file_checksum_hex(paths.test_labels);
  } else if (dataset == "cifar10") {
    if (want_train) {
      const auto paths = binnet::cifar10_train_paths(dir);
      out.train = binnet::normalize(binnet::load_cifar10(paths, "train"));
      for (const auto& p : paths) out.checksums[p] = file_checksum_hex(p);
    }
    const auto test_path = binnet::cifar10_test_path(dir);
    out.test = binnet::normalize(binnet::load_cifar10({test_path}, "test"));
    out.checksums[test_path] = file_checksum_hex(test_path);
  } else {
    throw binnet::DomainError("unknown dataset '" + dataset + "'");
  }
  if (want_train) out.train = take_prefix(std::move(out.train), train_limit);
  out.test = take_prefix(std::move(out.test), val_limit);
  return out;
}

json config_json(const binnet::TrainConfig& cfg, const std::string& dataset,
                 const std::string& preset) {
  return json{{"dataset", dataset},
              {"preset", preset},
              {"regularizer", regularizer_name(cfg.regularizer)},
              {"eta0", cfg.eta0},
              {"momentum", cfg.momentum},
              {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"seed", cfg.seed}};
}

void write_manifest(const fs::path& path, const std::string& command,
                    const json& config,
                    const std::map<std::string, std::string>& checksums,
                    const std::string& started, const std::string& status) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["dataset_checksums"] = checksums;
  m["started"] = started;
  m["finished"] = iso8601_now();
  m["engine_version"] = binnet::kEngineVersion;
  m["status"] = status;
  std::ofstream out(path);
  out << m.dump(2) << "\n";
}

struct TrainArgs {
  std::string dataset;
  std::string data_dir = "data";
  std::string regularizer = "none";
  std::string out_dir;
  std::string resume;
  int epochs = -1;
  std::uint64_t seed = 0;
  double eta0 = 0.001;
  double momentum = 0.9;
  int batch_size = 4;
  std::int64_t train_limit = 0;
  std::int64_t val_limit = 0;
  int ckpt_every = 0;
};

int run_train(const TrainArgs& a, const std::string& command) {
  const std::string started = iso8601_now();
  const std::string preset =
      a.dataset == "mnist" ? "mnist-fc" : "cifar10-vgg";
  const int default_epochs = a.dataset == "mnist" ? 10 : 5;

  binnet::TrainState state;
  if (!a.resume.empty()) {
    state = binnet::load_checkpoint(a.resume);
    if (a.epochs >= 0) state.cfg.epochs = a.epochs;
  } else {
    binnet::TrainConfig cfg;
    cfg.regularizer = parse_regularizer(a.regularizer);
    cfg.eta0 = a.eta0;
    cfg.momentum = a.momentum;
    cfg.batch_size = a.batch_size;
    cfg.epochs = a.epochs >= 0 ? a.epochs : default_epochs;
    cfg.seed = a.seed;
    state = binnet::TrainState::create(preset, cfg);
  }

  LoadedData data = load_dataset(a.dataset, a.data_dir, a.train_limit,
                                 a.val_limit, /*want_train=*/true);

  fs::create_directories(a.out_dir);
  const fs::path out_dir(a.out_dir);
  std::ofstream metrics(out_dir / "metrics.csv", std::ios::trunc);
  if (!metrics) throw binnet::IoError("cannot write " + a.out_dir + "/metrics.csv");
  metrics << kMetricsHeader << "\n";
  metrics.flush();

  const json config = config_json(state.cfg, a.dataset, preset);
  const auto observer = [&](const binnet::MetricsRecord& rec) {
    metrics << metrics_csv_row(rec) << "\n";
    metrics.flush();
    std::cout << "epoch " << rec.epoch << ": train_acc=" << fmt_g(rec.train_acc)
              << " val_acc=" << fmt_g(rec.val_acc)
              << " learn_time_s=" << fmt_g(rec.learn_time_s) << "\n";
    if (a.ckpt_every > 0 && rec.epoch % a.ckpt_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.bnnc", rec.epoch);
      binnet::save_checkpoint((out_dir / name).string(), state);
    }
  };

  try {
    binnet::train(state, data.train, data.test, observer);
  } catch (const binnet::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    binnet::save_checkpoint((out_dir / "final.bnnc").string(), state);
    write_manifest(out_dir / "manifest.json", command, config, data.checksums,
                   started, "diverged");
    return 2;
  }
  binnet::save_checkpoint((out_dir / "final.bnnc").string(), state);
  write_manifest(out_dir / "manifest.json", command, config, data.checksums,
                 started, "ok");
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string dataset;
  std::string data_dir = "data";
  std::int64_t val_limit = 0;
  bool compare = false;
};

int run_eval(const EvalArgs& a) {
  binnet::TrainState state = binnet::load_checkpoint(a.ckpt);
  LoadedData data =
      load_dataset(a.dataset, a.data_dir, 0, a.val_limit, /*want_train=*/false);

  const bool regularized =
      state.cfg.regularizer != binnet::Regularizer::kNone;
  if (a.compare) {
    const auto bin = binnet::evaluate(state.net, data.test,
                                      binnet::WeightMode::kBinary);
    const auto fp =
        binnet::evaluate(state.net, data.test, binnet::WeightMode::kReal);
    std::cout << "binary:   accuracy=" << fmt_g(bin.accuracy)
              << " time_per_image_s=" << fmt_g(bin.time_per_image_s) << "\n";
    std::cout << "fp:       accuracy=" << fmt_g(fp.accuracy)
              << " time_per_image_s=" << fmt_g(fp.time_per_image_s) << "\n";
    std::cout << "delta:    " << fmt_g(bin.accuracy - fp.accuracy) << "\n";
    return 0;
  }
  const auto mode =
      regularized ? binnet::WeightMode::kBinary : binnet::WeightMode::kReal;
  const auto res = binnet::evaluate(state.net, data.test, mode);
  std::cout << "accuracy=" << fmt_g(res.accuracy)
            << " time_per_image_s=" << fmt_g(res.time_per_image_s) << "\n";
  return 0;
}

struct BenchArgs {
  std::vector<std::string> kernels;
  std::int64_t size = 0;
  int reps = 50;
  std::string csv;
};

int run_bench(const BenchArgs& a) {
  std::vector<binnet::BenchResult> results;
  for (const std::string& name : a.kernels) {
    const auto kernel = binnet::parse_bench_kernel(name);
    if (!kernel) {
      std::cerr << "error: unknown kernel '" << name
                << "' (valid: fp_dense, bin_dense, fp_conv, bin_conv)\n";
      return 1;
    }
    const bool is_conv = *kernel == binnet::BenchKernel::kFpConv ||
                         *kernel == binnet::BenchKernel::kBinConv;
    const std::int64_t size = a.size > 0 ? a.size : (is_conv ? 64 : 1024);
    const auto r = binnet::run_benchmark(*kernel, size, a.reps);
    std::cout << binnet::kBenchCsvHeader << "\n"
              << binnet::bench_csv_row(r) << "\n";
    results.push_back(r);
  }
  if (!a.csv.empty()) {
    const bool fresh = !fs::exists(a.csv) || fs::file_size(a.csv) == 0;
    std::ofstream out(a.csv, std::ios::app);
    if (!out) throw binnet::IoError("cannot open " + a.csv);
    if (fresh) out << binnet::kBenchCsvHeader << "\n";
    for (const auto& r : results) out << binnet::bench_csv_row(r) << "\n";
  }
  const auto find = [&](const char* name) -> const binnet::BenchResult* {
    for (const auto& r : results)
      if (r.kernel == name) return &r;
    return nullptr;
  };
  const auto speedup = [&](const char* fp, const char* bin) {
    const auto* f = find(fp);
    const auto* b = find(bin);
    if (f && b && b->median_ns > 0)
      std::cout << "speedup " << bin << " vs " << fp << " (" << f->problem_size
                << "): " << fmt_g(static_cast<double>(f->median_ns) /
                                  static_cast<double>(b->median_ns))
                << "x\n";
  };
  speedup("fp_dense", "bin_dense");
  speedup("fp_conv", "bin_conv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binary-weight neural network engine"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");
  app.footer("BINNET_THREADS caps internal worker parallelism.");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a network");
  train_cmd->add_option("--dataset", train_args.dataset, "mnist or cifar10")
      ->required()
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  train_cmd->add_option("--data-dir", train_args.data_dir,
                        "directory holding the dataset files");
  train_cmd->add_option("--regularizer", train_args.regularizer,
                        "none, det or stoch")
      ->check(CLI::IsMember({"none", "det", "deterministic", "stoch",
                             "stochastic"}));
  train_cmd->add_option("--epochs", train_args.epochs,
                        "epoch count (default: 10 mnist, 5 cifar10)");
  train_cmd->add_option("--seed", train_args.seed, "run seed");
  train_cmd->add_option("--out", train_args.out_dir, "output directory")
      ->required();
  train_cmd->add_option("--resume", train_args.resume,
                        "checkpoint to continue from");
  train_cmd->add_option("--eta0", train_args.eta0, "initial learning rate");
  train_cmd->add_option("--momentum", train_args.momentum, "SGD momentum");
  train_cmd->add_option("--batch-size", train_args.batch_size,
                        "minibatch size");
  train_cmd->add_option("--train-limit", train_args.train_limit,
                        "use only the first N training images");
  train_cmd->add_option("--val-limit", train_args.val_limit,
                        "use only the first N validation images");
  train_cmd->add_option("--ckpt-every", train_args.ckpt_every,
                        "write a checkpoint every N epochs");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "mnist or cifar10")
      ->required()
      ->check(CLI::IsMember({"mnist", "cifar10"}));
  eval_cmd->add_option("--data-dir", eval_args.data_dir,
                       "directory holding the dataset files");
  eval_cmd->add_option("--val-limit", eval_args.val_limit,
                       "use only the first N validation images");
  eval_cmd->add_flag("--compare", eval_args.compare,
                     "report both binary and full-precision inference");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "time inference kernels");
  bench_cmd
      ->add_option("--kernel", bench_args.kernels,
                   "fp_dense, bin_dense, fp_conv, bin_conv (repeatable)")
      ->required();
  bench_cmd->add_option("--size", bench_args.size,
                        "problem size (default: 1024 dense, 64 conv)");
  bench_cmd->add_option("--reps", bench_args.reps,
                        "timed repetitions (minimum 30)");
  bench_cmd->add_option("--csv", bench_args.csv, "append results to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string command;
  for (int i = 0; i < argc; ++i)
    command += std::string(i ? " " : "") + argv[i];

  try {
    if (*train_cmd) return run_train(train_args, command);
    if (*eval_cmd) return run_eval(eval_args);
    if (*bench_cmd) return run_bench(bench_args);
  } catch (const binnet::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
