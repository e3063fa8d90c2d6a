// objnav: desk-scale object-goal navigation lab.
//
// Subcommands:
//   generate-scenes --count N --seed S --out DIR
//   plan            --scene F --goal r,c [--start r,c] [--out F]
//   train           --config F --seed S --steps N --out DIR
//   eval            --checkpoint F --scenes DIR --episodes N
//                   [--paired-with random] --out DIR
//   report          --in DIR

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "objnav/eval.hpp"

namespace fs = std::filesystem;
using namespace objnav;

namespace {

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig::from_config(Config::from_string(""));
  return RunConfig::from_config(Config::from_file(path));
}

int cmd_generate_scenes(int count, std::uint64_t seed, const std::string& out,
                        const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  fs::create_directories(out);
  const Rng root(seed);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t scene_seed = root.split(std::uint64_t(i)).seed();
    Scene scene = Scene::generate(cfg.scene, scene_seed);
    char name[64];
    std::snprintf(name, sizeof name, "scene_%04d.scene", i);
    scene.save((fs::path(out) / name).string());
    std::cout << name << " seed=" << scene_seed << " free_cells="
              << scene.free_cell_count() << " objects=" << scene.objects().size()
              << "\n";
  }
  return 0;
}

int cmd_plan(const std::string& scene_path, const std::string& goal_arg,
             const std::string& start_arg, const std::string& out) {
  Scene scene = Scene::load(scene_path);
  auto parse_cell = [](const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("expected r,c but got '" + s + "'");
    return std::pair<int, int>{std::stoi(s.substr(0, comma)),
                               std::stoi(s.substr(comma + 1))};
  };
  const auto [gr, gc] = parse_cell(goal_arg);
  std::vector<std::uint8_t> occ(std::size_t(scene.width()) * scene.height());
  for (int r = 0; r < scene.height(); ++r)
    for (int c = 0; c < scene.width(); ++c)
      occ[std::size_t(r) * scene.width() + c] = scene.occupied(r, c) ? 1 : 0;
  DistanceField field = fmm_solve(occ, scene.width(), gr, gc);
  std::cout << "goal snapped to (" << field.goal_row << "," << field.goal_col << ")\n";
  if (!start_arg.empty()) {
    const auto [sr, sc] = parse_cell(start_arg);
    ExtractedPath path = extract_path(field, sr, sc);
    if (!path.reached) {
      std::cout << "no path from (" << sr << "," << sc << ")\n";
    } else {
      std::cout << "path length " << path.length_cells * scene.cell_size()
                << " m over " << path.cells.size() << " cells:\n";
      for (const auto& [r, c] : path.cells) std::cout << "  " << r << "," << c << "\n";
    }
  }
  if (!out.empty()) {
    save_distance_field(field, out);
    std::cout << "field written to " << out << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, long long steps,
              const std::string& out) {
  RunConfig cfg = load_run_config(config_path);
  if (seed != 0) cfg.seed = seed;
  if (const char* env = std::getenv("OBJNAV_SEED"))
    cfg.seed = std::strtoull(env, nullptr, 10);
  if (steps > 0) cfg.train_steps = steps;
  fs::create_directories(out);

  DrqLearner learner(cfg.policy, cfg.learner, cfg.seed);
  const TrainResult result = train(learner, cfg);
  write_file((fs::path(out) / "train_log.csv").string(), result.csv);
  learner.net().params().save((fs::path(out) / "checkpoint.odrq").string());
  std::cout << "trained " << result.steps << " env steps over " << result.episodes
            << " episodes; critic updates " << learner.critic_update_count()
            << ", skipped " << learner.critic_optimizer().skipped_count() << "\n"
            << "wrote " << out << "/train_log.csv and " << out << "/checkpoint.odrq\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& scenes_dir,
             int episodes, const std::string& paired_with,
             const std::string& config_path, std::uint64_t pair_seed,
             const std::string& out) {
  RunConfig cfg = load_run_config(config_path);
  std::vector<Scene> scenes;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(scenes_dir))
    if (entry.path().extension() == ".scene") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) scenes.push_back(Scene::load(f.string()));
  if (scenes.empty()) throw std::runtime_error("no .scene files in " + scenes_dir);

  PolicyNet net(cfg.policy);
  net.params().load(checkpoint);
  fs::create_directories(out);

  const EvalRun trained =
      evaluate(&net, EvalMethod::Trained, cfg, scenes, episodes, pair_seed);
  write_file((fs::path(out) / "eval_trained.csv").string(), trained.csv);
  std::cout << "trained: success " << csv_num(trained.success) << " spl "
            << csv_num(trained.spl_value) << " dts " << csv_num(trained.dts_value)
            << " (excluded " << trained.excluded << ")\n";

  if (paired_with == "random") {
    const EvalRun random =
        evaluate(nullptr, EvalMethod::Random, cfg, scenes, episodes, pair_seed);
    write_file((fs::path(out) / "eval_random.csv").string(), random.csv);
    std::cout << "random:  success " << csv_num(random.success) << " spl "
              << csv_num(random.spl_value) << " dts " << csv_num(random.dts_value)
              << " (excluded " << random.excluded << ")\n";
  } else if (!paired_with.empty()) {
    throw std::runtime_error("unknown baseline: " + paired_with);
  }
  return 0;
}

struct Aggregate {
  double success_sum = 0, spl_sum = 0, dts_sum = 0;
  long long n = 0;
};

int cmd_report(const std::string& in_dir) {
  std::map<std::string, Aggregate> methods;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("eval_", 0) != 0 || entry.path().extension() != ".csv") continue;
    const std::string method = name.substr(5, name.size() - 5 - 4);
    std::ifstream is(entry.path());
    std::string line;
    std::getline(is, line);  // header
    Aggregate& agg = methods[method];
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ls, field, ',')) fields.push_back(field);
      if (fields.size() < 10 || fields[9] != "1") continue;  // skip invalid episodes
      agg.success_sum += std::stod(fields[3]);
      agg.spl_sum += std::stod(fields[4]);
      agg.dts_sum += std::stod(fields[5]);
      agg.n += 1;
    }
  }
  if (methods.empty()) {
    std::cout << "no eval_*.csv files in " << in_dir << "\n";
    return 1;
  }
  std::cout << "method    episodes  success  spl      dts(m)\n";
  for (const auto& [method, agg] : methods) {
    if (agg.n == 0) continue;
    std::printf("%-9s %-9lld %-8.3f %-8.3f %-8.3f\n", method.c_str(), agg.n,
                agg.success_sum / double(agg.n), agg.spl_sum / double(agg.n),
                agg.dts_sum / double(agg.n));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale object-goal navigation lab"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate-scenes", "generate procedural scenes");
  int gen_count = 10;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "scenes";
  std::string gen_config;
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--config", gen_config, "config file");

  auto* plan = app.add_subcommand("plan", "solve a travel-time field on a scene");
  std::string plan_scene, plan_goal, plan_start, plan_out;
  plan->add_option("--scene", plan_scene, "scene file")->required();
  plan->add_option("--goal", plan_goal, "goal cell r,c")->required();
  plan->add_option("--start", plan_start, "start cell r,c for path extraction");
  plan->add_option("--out", plan_out, "write the distance field here");

  auto* tr = app.add_subcommand("train", "train the long-term goal policy");
  std::string tr_config, tr_out = "run";
  std::uint64_t tr_seed = 0;
  long long tr_steps = 0;
  tr->add_option("--config", tr_config, "config file");
  tr->add_option("--seed", tr_seed, "seed override");
  tr->add_option("--steps", tr_steps, "env step budget override");
  tr->add_option("--out", tr_out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on held-out scenes");
  std::string ev_ckpt, ev_scenes, ev_paired, ev_config, ev_out = "eval";
  int ev_episodes = 200;
  std::uint64_t ev_pair_seed = 1234;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--scenes", ev_scenes, "directory of .scene files")->required();
  ev->add_option("--episodes", ev_episodes, "episodes per scene");
  ev->add_option("--paired-with", ev_paired, "baseline to pair against (random)");
  ev->add_option("--config", ev_config, "config file");
  ev->add_option("--pair-seed", ev_pair_seed, "pairing seed");
  ev->add_option("--out", ev_out, "output directory")->required();

  auto* rep = app.add_subcommand("report", "aggregate eval CSVs into a table");
  std::string rep_in;
  rep->add_option("--in", rep_in, "directory of eval_*.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate_scenes(gen_count, gen_seed, gen_out, gen_config);
    if (plan->parsed()) return cmd_plan(plan_scene, plan_goal, plan_start, plan_out);
    if (tr->parsed()) return cmd_train(tr_config, tr_seed, tr_steps, tr_out);
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_scenes, ev_episodes, ev_paired, ev_config,
                      ev_pair_seed, ev_out);
    if (rep->parsed()) return cmd_report(rep_in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
