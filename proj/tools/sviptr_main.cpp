// Command-line entry point: model statistics, inference, training,
// benchmarking and attention-map export.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "sviptr/backbone.hpp"
#include "sviptr/checkpoint.hpp"
#include "sviptr/ctc.hpp"
#include "sviptr/flops.hpp"
#include "sviptr/image_io.hpp"
#include "sviptr/runconfig.hpp"
#include "sviptr/trainer.hpp"

namespace {

using namespace sviptr;

struct ModelSelection {
  std::string variant = "sviptr-v1-t";
  std::string config_path;
  int64_t height = 32;
  int64_t width = 96;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--variant", variant, "Registry variant name")
        ->default_str(variant);
    cmd->add_option("--config", config_path,
                    "JSON run config (overrides --variant when given)");
    cmd->add_option("--height", height, "Input image height")->default_str("32");
    cmd->add_option("--width", width, "Input image width")->default_str("96");
  }

  // Returns the resolved structure plus the alphabet that fixes num_classes.
  std::pair<VariantConfig, Alphabet> resolve() const {
    if (!config_path.empty()) {
      RunConfig rc = load_run_config(config_path);
      Alphabet a = resolve_alphabet(rc);
      return {rc.model, std::move(a)};
    }
    VariantConfig cfg = registry_variant(variant);
    Alphabet a = Alphabet::default_alphabet();
    cfg.num_classes = a.num_classes();
    return {cfg, std::move(a)};
  }
};

std::string describe(const VariantConfig& cfg) {
  return cfg.name.empty() ? std::string("custom") : cfg.name;
}

int cmd_count(const ModelSelection& sel) {
  auto [cfg, alphabet] = sel.resolve();
  const FlopReport rep = analyze_model(cfg, sel.height, sel.width);
  std::printf("variant=%s\n", describe(cfg).c_str());
  std::printf("permutation=%s\n", format_permutation(cfg.perm).c_str());
  std::printf("backbone_params=%lld\n", static_cast<long long>(rep.backbone_params));
  std::printf("head_params=%lld\n", static_cast<long long>(rep.head_params));
  std::printf("total_params=%lld\n", static_cast<long long>(rep.total_params()));
  return 0;
}

int cmd_flops(const ModelSelection& sel) {
  auto [cfg, alphabet] = sel.resolve();
  const FlopReport rep = analyze_model(cfg, sel.height, sel.width);
  std::printf("variant=%s\n", describe(cfg).c_str());
  std::printf("input_height=%lld\n", static_cast<long long>(rep.h_in));
  std::printf("input_width=%lld\n", static_cast<long long>(rep.w_in));
  std::printf("backbone_macs=%lld\n", static_cast<long long>(rep.backbone_macs));
  std::printf("backbone_gmacs=%.6f\n", static_cast<double>(rep.backbone_macs) / 1e9);
  for (const auto& [section, macs] : rep.section_macs)
    std::printf("macs.%s=%lld\n", section.c_str(), static_cast<long long>(macs));
  std::printf("head_macs=%lld\n", static_cast<long long>(rep.head_macs));
  std::printf("total_macs=%lld\n", static_cast<long long>(rep.total_macs()));
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& image_path,
              const std::string& alphabet_path) {
  Model<float> model = load_checkpoint_model(checkpoint);
  const Alphabet alphabet =
      alphabet_path.empty() ? Alphabet::default_alphabet() : Alphabet::from_file(alphabet_path);
  if (alphabet.num_classes() != model.config().num_classes)
    throw std::runtime_error("alphabet has " + std::to_string(alphabet.num_classes()) +
                             " classes but the checkpoint expects " +
                             std::to_string(model.config().num_classes));
  const Image img = read_image(image_path);
  Tensor<float> input = to_model_input(img, read_checkpoint_meta(checkpoint).input_height);
  const Shape s = input.shape();
  Graph<float> g(false);
  auto x = make_leaf<float>(input.reshaped({1, s[0], s[1], s[2]}), "image");
  auto out = model.forward(g, x);
  const auto decoded = ctc_greedy_decode_batch(out.logits->value);
  std::printf("text=%s\n", alphabet.decode(decoded[0]).c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& metrics_override,
              const std::string& checkpoint_override) {
  RunConfig rc = config_path.empty() ? default_run_config() : load_run_config(config_path);
  if (!metrics_override.empty()) rc.train.metrics_path = metrics_override;
  if (!checkpoint_override.empty()) rc.train.checkpoint_path = checkpoint_override;
  const Alphabet alphabet = resolve_alphabet(rc);

  Model<float> model =
      Model<float>::build(rc.model, rc.seed, rc.input_height, rc.input_width);
  std::printf("variant=%s params=%lld classes=%lld seed=%llu\n", describe(rc.model).c_str(),
              static_cast<long long>(model.backbone_params()),
              static_cast<long long>(rc.model.num_classes),
              static_cast<unsigned long long>(rc.seed));

  CheckpointMeta meta{rc.model, rc.seed, rc.input_height, rc.input_width};
  auto result = train_model<float>(
      model, rc.optim, rc.train, alphabet,
      [](const EpochMetrics& m) { std::printf("%s\n", format_metrics_line(m).c_str()); },
      rc.train.checkpoint_path.empty()
          ? std::function<void(const Model<float>&)>()
          : [&](const Model<float>& best) {
              save_checkpoint(rc.train.checkpoint_path, meta, best.store);
            });
  std::printf("best_accuracy=%.6f best_epoch=%lld epochs_run=%lld\n", result.best_accuracy,
              static_cast<long long>(result.best_epoch),
              static_cast<long long>(result.epochs_run));
  return 0;
}

int cmd_bench(const std::string& only_variant, int64_t width, int iters, int threads) {
  Eigen::setNbThreads(threads);
  const int64_t batch = 4, H = 32;
  struct Row {
    std::string name;
    double ms_median;
    double gmacs;
  };
  std::vector<Row> rows;
  const std::vector<std::string> names =
      only_variant.empty() ? registry_names() : std::vector<std::string>{only_variant};
  for (const auto& name : names) {
    VariantConfig cfg = registry_variant(name);
    Model<float> model = Model<float>::build(cfg, 1, H, width);
    Rng rng(99, 0);
    Tensor<float> batch_img({batch, 3, H, width});
    for (int64_t i = 0; i < batch_img.numel(); ++i)
      batch_img[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto run_once = [&] {
      Graph<float> g(false);
      auto x = make_leaf<float>(batch_img, "images");
      auto out = model.forward(g, x);
      return out.logits->value[0];  // keep the result alive
    };
    float sink = 0;
    for (int i = 0; i < 5; ++i) sink += run_once();  // warmup
    std::vector<double> times;
    for (int i = 0; i < iters; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      sink += run_once();
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                      static_cast<double>(batch));
    }
    (void)sink;
    std::sort(times.begin(), times.end());
    const double med = times[times.size() / 2];
    const double mean =
        std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
    double var = 0;
    for (double t : times) var += (t - mean) * (t - mean);
    const double stddev = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
    const FlopReport rep = analyze_model(cfg, H, width);
    rows.push_back({name, med, static_cast<double>(rep.backbone_macs) / 1e9});
    std::printf("%s ms_mean=%.3f ms_median=%.3f ms_stddev=%.3f gmacs=%.4f\n", name.c_str(), mean,
                med, stddev, rows.back().gmacs);
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.ms_median < b.ms_median; });
  std::string ordering;
  for (const auto& r : rows) {
    if (!ordering.empty()) ordering += '<';
    ordering += r.name;
  }
  std::printf("latency_ordering=%s\n", ordering.c_str());
  return 0;
}

int cmd_dump_attn(const std::string& checkpoint, const std::string& image_path,
                  const std::string& out_dir, bool per_head) {
  Model<float> model = load_checkpoint_model(checkpoint);
  const Image img = read_image(image_path);
  Tensor<float> input = to_model_input(img, read_checkpoint_meta(checkpoint).input_height);
  const Shape s = input.shape();
  std::filesystem::create_directories(out_dir);

  Graph<float> g(false);
  auto x = make_leaf<float>(input.reshaped({1, s[0], s[1], s[2]}), "image");
  std::vector<BlockProbe<float>> probes;
  model.forward(g, x, 0, &probes);

  int written = 0;
  for (const auto& p : probes) {
    const int64_t heads = p.received.dim(0), H = p.received.dim(1), W = p.received.dim(2);
    // Head mean.
    Tensor<float> mean({H, W});
    for (int64_t hd = 0; hd < heads; ++hd)
      for (int64_t i = 0; i < H * W; ++i) mean[i] += p.received[hd * H * W + i];
    for (int64_t i = 0; i < H * W; ++i) mean[i] /= static_cast<float>(heads);
    const std::string stem = out_dir + "/" + p.name;
    write_pgm_normalized(stem + ".pgm", mean.data(), H, W);
    ++written;
    if (per_head)
      for (int64_t hd = 0; hd < heads; ++hd) {
        write_pgm_normalized(stem + ".head" + std::to_string(hd) + ".pgm",
                             p.received.data() + hd * H * W, H, W);
        ++written;
      }
  }
  std::printf("blocks=%zu files=%d dir=%s\n", probes.size(), written, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-text recognition backbone toolkit"};
  app.require_subcommand(1);

  ModelSelection count_sel, flops_sel;
  auto* count_cmd = app.add_subcommand("count", "Report parameter counts");
  count_sel.add_options(count_cmd);
  auto* flops_cmd = app.add_subcommand("flops", "Report multiply-accumulate counts");
  flops_sel.add_options(flops_cmd);

  std::string infer_ckpt, infer_image, infer_alphabet;
  auto* infer_cmd = app.add_subcommand("infer", "Recognise text in an image");
  infer_cmd->add_option("--checkpoint,--ckpt", infer_ckpt, "Checkpoint manifest (.json)")
      ->required();
  infer_cmd->add_option("--image", infer_image, "Input image (binary PGM/PPM)")->required();
  infer_cmd->add_option("--alphabet", infer_alphabet, "Alphabet file (one symbol per line)");

  std::string train_config, train_metrics, train_ckpt_out;
  auto* train_cmd = app.add_subcommand("train", "Train on synthetic glyph data");
  train_cmd->add_option("--config", train_config, "JSON run config");
  train_cmd->add_option("--metrics", train_metrics, "Metrics CSV path (overrides config)");
  train_cmd->add_option("--checkpoint-out", train_ckpt_out,
                        "Best-accuracy checkpoint path (overrides config)");

  std::string bench_variant;
  int64_t bench_width = 96;
  int bench_threads = 1, bench_iters = 10;
  auto* bench_cmd = app.add_subcommand("bench", "Measure forward latency at batch 4");
  bench_cmd->add_option("--variant", bench_variant,
                        "Single registry variant (default: all four)");
  bench_cmd->add_option("--width", bench_width, "Input width at height 32")->default_str("96");
  bench_cmd->add_option("--iters,--repeats", bench_iters, "Timed runs per variant")
      ->default_str("10");
  bench_cmd->add_option("--threads", bench_threads, "Math-library thread count")
      ->default_str("1");

  std::string dump_ckpt, dump_image, dump_dir = "attn-maps";
  bool dump_per_head = false;
  auto* dump_cmd = app.add_subcommand("dump-attn", "Export per-block attention-mass maps");
  dump_cmd->add_option("--checkpoint,--ckpt", dump_ckpt, "Checkpoint manifest (.json)")
      ->required();
  dump_cmd->add_option("--image", dump_image, "Input image (binary PGM/PPM)")->required();
  dump_cmd->add_option("--out", dump_dir, "Output directory")->default_str(dump_dir);
  dump_cmd->add_flag("--per-head", dump_per_head, "Also write one map per head");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; any parse error is usage
  }

  try {
    if (count_cmd->parsed()) return cmd_count(count_sel);
    if (flops_cmd->parsed()) return cmd_flops(flops_sel);
    if (infer_cmd->parsed()) return cmd_infer(infer_ckpt, infer_image, infer_alphabet);
    if (train_cmd->parsed()) return cmd_train(train_config, train_metrics, train_ckpt_out);
    if (bench_cmd->parsed())
      return cmd_bench(bench_variant, bench_width, bench_iters, bench_threads);
    if (dump_cmd->parsed()) return cmd_dump_attn(dump_ckpt, dump_image, dump_dir, dump_per_head);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
