// Command-line front end: data generation, the two training phases,
// inference, evaluation and attention dumps.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cdn/config.hpp"
#include "cdn/dataio.hpp"
#include "cdn/error.hpp"
#include "cdn/evaluation.hpp"
#include "cdn/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cdn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr const char* kOutputRootVar = "CDN_OUTPUT_ROOT";

/// Relative output paths land under $CDN_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p) {
  const char* root = std::getenv(kOutputRootVar);
  if (root == nullptr || *root == '\0' || p.is_absolute()) return p;
  return fs::path(root) / p;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

train::TrainConfig read_config(const std::string& path) {
  return path.empty() ? train::TrainConfig::from_preset("desk") : train::load_config(path);
}

train::RunOptions run_options(const fs::path& checkpoint_out) {
  auto log_path = fs::path(checkpoint_out.string() + ".log.jsonl");
  ensure_parent(log_path);
  auto log = std::make_shared<std::ofstream>(log_path, std::ios::app);
  auto started = std::chrono::steady_clock::now();
  train::RunOptions opts;
  opts.diagnostics_dir = checkpoint_out.parent_path() / "diagnostics";
  opts.on_epoch = [log, started](const train::EpochLog& e) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::fprintf(stderr,
                 "[%s] epoch %4d  lr %.2e  loss %.5f  box %.4f  giou %.4f  int %.4f  obj %.4f  "
                 "act %.4f  |g| %.3f  %.1fs\n",
                 train::phase_name(e.phase), e.epoch, e.learning_rate, e.loss, e.box, e.giou,
                 e.interactive, e.object, e.action, e.grad_norm, secs);
    *log << nlohmann::json{{"phase", train::phase_name(e.phase)},
                           {"epoch", e.epoch},
                           {"lr", e.learning_rate},
                           {"loss", e.loss},
                           {"box", e.box},
                           {"giou", e.giou},
                           {"interactive", e.interactive},
                           {"object", e.object},
                           {"action", e.action},
                           {"grad_norm", e.grad_norm}}
                .dump()
         << '\n';
    log->flush();
  };
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade disentangling HOI detector"};
  app.require_subcommand(1);

  std::string spec_path, data_dir, config_path, checkpoint, out, preds, gt, classes, report;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("generate-data", "Render a synthetic HOI dataset");
  gen->add_option("--spec", spec_path, "Scene spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--out", out, "Output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "Train from scratch (main phase)");
  tr->add_option("--config", config_path, "Run config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Checkpoint to write")->required();

  auto* ft = app.add_subcommand("finetune-reweight",
                                "Decoupled fine-tuning with dynamic re-weighting");
  ft->add_option("--config", config_path, "Run config (JSON)")->check(CLI::ExistingFile);
  ft->add_option("--checkpoint", checkpoint, "Main-phase checkpoint")->required()->check(CLI::ExistingFile);
  ft->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ft->add_option("--out", out, "Checkpoint to write")->required();

  auto* inf = app.add_subcommand("infer", "Write post-processed predictions");
  inf->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--images", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  inf->add_option("--out", out, "Prediction file to write")->required();
  inf->add_option("--config", config_path,
                  "Run config whose postproc section overrides the checkpoint's")
      ->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "Default-setting mAP of a prediction file");
  ev->add_option("--preds", preds, "Prediction file")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", gt, "Ground-truth annotations")->required()->check(CLI::ExistingFile);
  ev->add_option("--classes", classes, "HOI class table")->required()->check(CLI::ExistingFile);
  ev->add_option("--report", report, "Report file to write")->required();

  auto* da = app.add_subcommand("dump-attention", "Write top-1 query cross-attention maps");
  da->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  da->add_option("--images", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  da->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      const auto spec = data::load_scene_spec(spec_path);
      const auto dataset = data::generate_dataset(spec, seed);
      data::save_dataset(output_path(out), dataset);
      std::fprintf(stderr, "wrote %zu images to %s\n", dataset.images.size(),
                   output_path(out).c_str());
    } else if (*tr) {
      const auto dataset = data::load_dataset(data_dir);
      const fs::path dst = output_path(out);
      ensure_parent(dst);
      const auto ckpt = train::train(read_config(config_path), dataset, run_options(dst));
      train::save_checkpoint(dst, ckpt);
    } else if (*ft) {
      const auto dataset = data::load_dataset(data_dir);
      const auto config = train::resolve_config(read_config(config_path), dataset);
      const fs::path dst = output_path(out);
      ensure_parent(dst);
      auto ckpt = train::finetune_reweight(train::load_checkpoint(checkpoint, config), config,
                                           dataset, run_options(dst));
      train::save_checkpoint(dst, ckpt);
    } else if (*inf) {
      const auto dataset = data::load_dataset(data_dir);
      const auto ckpt = train::load_checkpoint(checkpoint);
      auto pnms = ckpt.config.pnms;
      if (!config_path.empty()) pnms = train::load_config(config_path).pnms;
      const fs::path dst = output_path(out);
      ensure_parent(dst);
      data::save_predictions(dst, train::infer(*ckpt.model, pnms, dataset));
    } else if (*ev) {
      const auto result = eval::evaluate_files(preds, gt, classes);
      const fs::path dst = output_path(report);
      ensure_parent(dst);
      eval::write_report(dst, result);
      std::fputs(eval::format_report(result).c_str(), stdout);
    } else if (*da) {
      const auto dataset = data::load_dataset(data_dir);
      const auto ckpt = train::load_checkpoint(checkpoint);
      const auto files = train::dump_attention(*ckpt.model, dataset, output_path(out));
      std::fprintf(stderr, "wrote %zu attention maps to %s\n", files.size(),
                   output_path(out).c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
