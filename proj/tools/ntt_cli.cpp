#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntt/harness.hpp"
#include "ntt/planner.hpp"
#include "ntt/simworld.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<ntt::Scene> load_split(const fs::path& data, const std::string& split) {
  const fs::path file = data / (split + ".jsonl");
  if (!fs::exists(file)) throw std::runtime_error("missing " + file.string());
  return ntt::read_scenes_jsonl(file.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ntt::L2Mode l2_mode_from_string(const std::string& s) {
  if (s == "instantaneous") return ntt::L2Mode::instantaneous;
  if (s == "cumulative") return ntt::L2Mode::cumulative;
  throw UsageError("unknown l2 mode: " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navigation-guided target planner"};
  app.require_subcommand(1);

  // gen-data
  ntt::DatasetConfig gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--scenes", gen.train_scenes, "Training scenes")->capture_default_str();
  gen_cmd->add_option("--val-scenes", gen.val_scenes, "Validation scenes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--turn-fraction", gen.turn_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  gen_cmd->add_option("--route-sigma", gen.route_sigma, "Route noise, m")->capture_default_str();

  // train
  ntt::TrainConfig tc;
  std::string train_data, train_out, train_mode = "tgt_path";
  auto* train_cmd = app.add_subcommand("train", "Two-stage training");
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint directory")->required();
  train_cmd->add_option("--mode", train_mode)->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();
  train_cmd->add_option("--epochs1", tc.epochs1)->capture_default_str();
  train_cmd->add_option("--epochs2", tc.epochs2)->capture_default_str();
  train_cmd->add_option("--lr", tc.base_lr)->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size)->check(CLI::PositiveNumber)->capture_default_str();

  // eval
  std::string eval_ckpt, eval_data, eval_subset = "all", eval_l2 = "instantaneous", eval_split = "val",
                                    eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", eval_ckpt)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--subset", eval_subset)->check(CLI::IsMember({"all", "turning"}))->capture_default_str();
  eval_cmd->add_option("--l2-mode", eval_l2)
      ->check(CLI::IsMember({"instantaneous", "cumulative"}))
      ->capture_default_str();
  eval_cmd->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val"}))->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Also write the report here");

  // ablate
  ntt::TrainConfig ab;
  std::string ab_data, ab_out, ab_modes = "tgt_path,no_target,tgt_cmd,tgt_emb", ab_seeds = "0,1,2";
  auto* ab_cmd = app.add_subcommand("ablate", "Train and evaluate every (mode, seed)");
  ab_cmd->add_option("--data", ab_data)->required();
  ab_cmd->add_option("--out", ab_out, "Output directory")->required();
  ab_cmd->add_option("--modes", ab_modes)->capture_default_str();
  ab_cmd->add_option("--seeds", ab_seeds)->capture_default_str();
  ab_cmd->add_option("--epochs1", ab.epochs1)->capture_default_str();
  ab_cmd->add_option("--epochs2", ab.epochs2)->capture_default_str();
  ab_cmd->add_option("--lr", ab.base_lr)->capture_default_str();
  ab_cmd->add_option("--batch", ab.batch_size)->check(CLI::PositiveNumber)->capture_default_str();

  // grad-check
  std::uint64_t gc_seed = 0;
  std::string gc_mode = "tgt_path";
  bool gc_native = false;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of the stage-2 loss");
  gc_cmd->add_option("--seed", gc_seed)->capture_default_str();
  gc_cmd->add_option("--mode", gc_mode)->capture_default_str();
  gc_cmd->add_flag("--native", gc_native, "Evaluate differences in double instead of long double");

  // plan
  std::string plan_ckpt, plan_data, plan_scene, plan_out;
  auto* plan_cmd = app.add_subcommand("plan", "Plan one scene and write the plan record");
  plan_cmd->add_option("--ckpt", plan_ckpt)->required();
  plan_cmd->add_option("--data", plan_data, "Dataset directory (searched val then train)")->required();
  plan_cmd->add_option("--scene-id", plan_scene)->required();
  plan_cmd->add_option("--out", plan_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*gen_cmd) {
      std::vector<std::string> warnings;
      const auto ds = ntt::generate_dataset(gen, &warnings);
      ntt::write_dataset(ds, gen, gen_out);
      for (const auto& w : warnings) std::cerr << json{{"warning", w}}.dump() << '\n';
      std::cout << json{{"out", gen_out},
                        {"train", ds.train.size()},
                        {"val", ds.val.size()},
                        {"warnings", warnings.size()}}
                       .dump()
                << '\n';
    } else if (*train_cmd) {
      tc.mode = ntt::plan_mode_from_string(train_mode);
      const auto scenes = load_split(train_data, "train");
      const auto result = ntt::train(tc, scenes);
      ntt::save_checkpoint(train_out, result.params, tc);
      std::ostringstream csv;
      ntt::write_loss_csv(csv, result.curve);
      write_text(fs::path(train_out) / "loss_curve.csv", csv.str());
      std::cout << json{{"ckpt", train_out},
                        {"steps", result.curve.size()},
                        {"final_loss", result.curve.empty() ? 0.0 : result.curve.back().total}}
                       .dump()
                << '\n';
    } else if (*eval_cmd) {
      const auto ckpt = ntt::load_checkpoint(eval_ckpt);
      auto scenes = load_split(eval_data, eval_split);
      if (eval_subset == "turning") scenes = ntt::turning_subset(scenes);
      const auto report = ntt::evaluate(ckpt.params, ckpt.model, scenes, ckpt.mode,
                                        l2_mode_from_string(eval_l2), eval_subset);
      const std::string text = ntt::metrics_json(report);
      if (!eval_out.empty()) write_text(eval_out, text + "\n");
      std::cout << text << '\n';
    } else if (*ab_cmd) {
      std::vector<ntt::PlanMode> modes;
      for (const auto& m : split_list(ab_modes)) modes.push_back(ntt::plan_mode_from_string(m));
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(ab_seeds)) seeds.push_back(std::stoull(s));
      const auto train_scenes = load_split(ab_data, "train");
      const auto eval_scenes = load_split(ab_data, "val");
      const auto rows = ntt::run_ablation(train_scenes, eval_scenes, modes, seeds, ab, &std::cerr);
      std::ostringstream csv;
      ntt::write_ablation_csv(csv, rows);
      write_text(fs::path(ab_out) / "ablation.csv", csv.str());
      write_text(fs::path(ab_out) / "config.json", ntt::train_config_json(ab) + "\n");
      std::cout << json{{"out", (fs::path(ab_out) / "ablation.csv").string()}, {"rows", rows.size()}}.dump()
                << '\n';
    } else if (*gc_cmd) {
      const auto mode = ntt::plan_mode_from_string(gc_mode);
      const auto r = gc_native ? ntt::grad_check_native(gc_seed, mode) : ntt::grad_check(gc_seed, mode);
      const bool pass = r.max_rel_error < 1e-4;
      std::cout << json{{"seed", gc_seed},
                        {"mode", gc_mode},
                        {"precision", gc_native ? "double" : "long double"},
                        {"max_rel_error", r.max_rel_error},
                        {"worst_param", r.worst_param},
                        {"worst_index", r.worst_index},
                        {"analytic", r.analytic},
                        {"numeric", r.numeric},
                        {"coordinates", r.coordinates},
                        {"pass", pass}}
                       .dump()
                << '\n';
      return pass ? 0 : 1;
    } else if (*plan_cmd) {
      const auto ckpt = ntt::load_checkpoint(plan_ckpt);
      const ntt::Scene* found = nullptr;
      std::vector<ntt::Scene> pool;
      for (const char* split : {"val", "train"}) {
        const fs::path file = fs::path(plan_data) / (std::string(split) + ".jsonl");
        if (!fs::exists(file)) continue;
        pool = ntt::read_scenes_jsonl(file.string());
        for (const auto& s : pool) {
          if (s.meta.id == plan_scene) {
            found = &s;
            break;
          }
        }
        if (found) break;
      }
      if (!found) throw std::runtime_error("scene not found: " + plan_scene);
      const auto result = ntt::plan(*found, ckpt.params, ckpt.model, ckpt.mode);
      const std::string text = ntt::plan_record_json(plan_scene, ckpt.mode, result);
      write_text(plan_out, text + "\n");
      std::cout << text << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const ntt::TrainingDiverged& e) {
    std::cerr << json{{"error", "diverged"}, {"stage", e.stage}, {"step", e.step}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "failed"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
