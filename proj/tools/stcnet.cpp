// stcnet: train and evaluate the bidirectional video-prediction anomaly
// detector on frame directories or the built-in synthetic benchmark.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stc/checkpoint.hpp"
#include "stc/eval.hpp"
#include "stc/image_io.hpp"
#include "stc/scoring.hpp"
#include "stc/training.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::string checkpoint;
  long long seed = -1;  // -1: keep the config's seed
  int offset = -1;      // -1: keep the default
  bool no_gan = false;
  bool no_bidirectional = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--seed", a.seed, "override the config seed");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint path");
  cmd->add_flag("--no-gan", a.no_gan, "disable adversarial training");
  cmd->add_flag("--no-bidirectional", a.no_bidirectional, "forward-only prediction");
  cmd->add_option("--accumulation-offset", a.offset,
                  "score frame t with the prediction error at t+D");
}

std::map<std::string, std::string> load_kv(const std::string& path) {
  if (path.empty()) return {};
  return stc::parse_kv_file(path);
}

int kv_int(const std::map<std::string, std::string>& kv, const char* key, int fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoi(it->second);
}

std::string kv_str(const std::map<std::string, std::string>& kv, const char* key,
                   const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

stc::TrainConfig make_train_config(const std::map<std::string, std::string>& kv,
                                   const CommonArgs& a) {
  stc::TrainConfig cfg = stc::train_config_from_kv(kv);
  if (a.seed >= 0) cfg.seed = static_cast<unsigned>(a.seed);
  if (a.no_gan) cfg.adversarial = false;
  if (a.no_bidirectional) cfg.bidirectional = false;
  return cfg;
}

// `data = synthetic` generates the benchmark on the fly; otherwise `data`
// names a directory of per-video frame subdirectories with optional
// <name>_labels.txt files beside them.
std::vector<stc::VideoSequence<float>> load_videos(const std::map<std::string, std::string>& kv,
                                                   unsigned seed, bool test_split) {
  const std::string data = kv_str(kv, "data", "synthetic");
  if (data == "synthetic") {
    stc::SyntheticSuiteConfig sc;
    sc.num_train = kv_int(kv, "synth_train", sc.num_train);
    sc.num_test = kv_int(kv, "synth_test", sc.num_test);
    sc.canvas = kv_int(kv, "canvas", sc.canvas);
    sc.train_frames = kv_int(kv, "synth_frames", sc.train_frames);
    sc.test_frames = kv_int(kv, "synth_frames", sc.test_frames);
    sc.num_objects = kv_int(kv, "synth_objects", sc.num_objects);
    sc.seed = seed;
    auto suite = stc::make_synthetic_suite<float>(sc);
    return test_split ? suite.test : suite.train;
  }
  const fs::path root = fs::path(data) / (test_split ? "test" : "train");
  if (!fs::is_directory(root)) {
    throw std::runtime_error("data directory not found: " + root.string());
  }
  const int size = kv_int(kv, "frame_size", 32);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("no video directories under " + root.string());
  std::vector<stc::VideoSequence<float>> videos;
  for (const auto& d : dirs) {
    auto v = stc::load_frame_dir<float>(d, size, kv_int(kv, "frame_channels", 1));
    const std::string labels = d + "_labels.txt";
    if (fs::exists(labels)) v.labels = stc::load_labels(labels);
    videos.push_back(std::move(v));
  }
  return videos;
}

std::string config_echo(const std::map<std::string, std::string>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

stc::ScoringConfig scoring_config(const stc::TrainConfig& train, const CommonArgs& a) {
  stc::ScoringConfig cfg;
  cfg.generator = train.generator;
  cfg.bidirectional = train.bidirectional;
  if (a.offset >= 0) cfg.offset = a.offset;
  if (cfg.offset >= cfg.generator.horizon) {
    throw std::runtime_error("accumulation offset " + std::to_string(cfg.offset) +
                             " must be below the horizon " +
                             std::to_string(cfg.generator.horizon));
  }
  return cfg;
}

int cmd_synth(const CommonArgs& a) {
  if (a.out.empty()) throw std::runtime_error("synth: --out is required");
  auto kv = load_kv(a.config);
  stc::SyntheticSuiteConfig sc;
  sc.num_train = kv_int(kv, "synth_train", sc.num_train);
  sc.num_test = kv_int(kv, "synth_test", sc.num_test);
  sc.canvas = kv_int(kv, "canvas", sc.canvas);
  sc.train_frames = kv_int(kv, "synth_frames", sc.train_frames);
  sc.test_frames = kv_int(kv, "synth_frames", sc.test_frames);
  sc.num_objects = kv_int(kv, "synth_objects", sc.num_objects);
  if (a.seed >= 0) sc.seed = static_cast<unsigned>(a.seed);
  auto suite = stc::make_synthetic_suite<float>(sc);
  for (const auto& v : suite.train) {
    stc::write_video_dir((fs::path(a.out) / "train" / v.source).string(), v, false);
  }
  for (const auto& v : suite.test) {
    stc::write_video_dir((fs::path(a.out) / "test" / v.source).string(), v, true);
  }
  std::cout << "wrote " << suite.train.size() << " training and " << suite.test.size()
            << " labeled test videos to " << a.out << "\n";
  return 0;
}

int cmd_train(const CommonArgs& a) {
  auto kv = load_kv(a.config);
  stc::TrainConfig cfg = make_train_config(kv, a);
  auto videos = load_videos(kv, cfg.seed, false);
  stc::Trainer<float> trainer(cfg, videos);

  const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
  fs::create_directories(out);
  std::ofstream log(out / "train_log.csv");
  if (!log) throw std::runtime_error("cannot open " + (out / "train_log.csv").string());
  trainer.run(&log);

  const std::string ckpt =
      a.checkpoint.empty() ? (out / "model.ckpt").string() : a.checkpoint;
  stc::save_checkpoint(ckpt, trainer.store(), trainer.generator_optimizer(),
                       trainer.discriminator_optimizer(), trainer.iteration(), config_echo(kv));
  std::cout << "trained " << trainer.iteration() << " iterations, checkpoint at " << ckpt << "\n";
  return 0;
}

int cmd_score(const CommonArgs& a) {
  if (a.checkpoint.empty()) throw std::runtime_error("score: --checkpoint is required");
  if (a.out.empty()) throw std::runtime_error("score: --out is required");
  auto kv = load_kv(a.config);
  stc::TrainConfig cfg = make_train_config(kv, a);
  stc::LoadedCheckpoint ck = stc::load_checkpoint(a.checkpoint);
  stc::ScoringConfig scfg = scoring_config(cfg, a);
  auto videos = load_videos(kv, cfg.seed, true);
  fs::create_directories(a.out);
  for (const auto& v : videos) {
    stc::ScoreSeries s = stc::accumulated_regular_score(v, ck.store, scfg);
    stc::write_score_csv((fs::path(a.out) / ("scores_" + v.source + ".csv")).string(), s);
  }
  std::cout << "scored " << videos.size() << " videos into " << a.out << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& a) {
  if (a.out.empty()) throw std::runtime_error("eval: --out is required");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(a.out)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("scores_", 0) == 0 && e.path().extension() == ".csv") {
      files.push_back(e.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("eval: no scores_*.csv under " + a.out);
  std::vector<stc::ScoreSeries> series;
  for (const auto& f : files) series.push_back(stc::read_score_csv(f));
  stc::EvaluationReport rep = stc::evaluate(series);
  stc::write_report((fs::path(a.out) / "report.json").string(), rep);
  std::cout << "overall_auc=" << rep.overall_auc << " macro_auc=" << rep.macro_auc
            << " delta_p=" << rep.delta_p << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& a) {
  auto kv = load_kv(a.config);
  stc::TrainConfig base = make_train_config(kv, a);
  auto train_videos = load_videos(kv, base.seed, false);
  auto test_videos = load_videos(kv, base.seed, true);

  struct Variant {
    std::string name;
    bool gan;
    bool bidirectional;
    int offset;
  };
  const int d = a.offset >= 0 ? a.offset : 2;
  const std::vector<Variant> variants = {
      {"full", base.adversarial, base.bidirectional, d},
      {"no_gan", false, base.bidirectional, d},
      {"no_bidirectional", base.adversarial, false, d},
      {"no_accumulation", base.adversarial, base.bidirectional, 0},
  };

  std::ostringstream table;
  table << "variant,overall_auc,macro_auc,delta_p\n";
  stc::ParamStore<float>* reuse = nullptr;
  std::unique_ptr<stc::Trainer<float>> full_trainer, trainer;
  for (const auto& v : variants) {
    stc::TrainConfig cfg = base;
    cfg.adversarial = v.gan;
    cfg.bidirectional = v.bidirectional;
    stc::ParamStore<float>* store;
    if (v.name == "no_accumulation") {
      store = reuse;  // same model as "full", scored without the offset
    } else {
      trainer = std::make_unique<stc::Trainer<float>>(cfg, train_videos);
      trainer->run();
      store = &trainer->store();
      if (v.name == "full") {
        full_trainer = std::move(trainer);
        store = reuse = &full_trainer->store();
      }
    }
    stc::ScoringConfig scfg;
    scfg.generator = cfg.generator;
    scfg.bidirectional = cfg.bidirectional;
    scfg.offset = v.offset;
    std::vector<stc::ScoreSeries> series;
    for (const auto& video : test_videos) {
      series.push_back(stc::accumulated_regular_score(video, *store, scfg));
    }
    stc::EvaluationReport rep = stc::evaluate(series);
    table << v.name << ',' << rep.overall_auc << ',' << rep.macro_auc << ',' << rep.delta_p
          << "\n";
  }

  std::cout << table.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream out(fs::path(a.out) / "ablation.csv");
    out << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bidirectional video-prediction anomaly detection"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  CLI::App* train = app.add_subcommand("train", "train a model");
  CLI::App* score = app.add_subcommand("score", "score test videos with a checkpoint");
  CLI::App* eval = app.add_subcommand("eval", "aggregate score CSVs into a report");
  CLI::App* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
  for (CLI::App* cmd : {synth, train, score, eval, ablate}) add_common(cmd, args);

  CLI11_PARSE(app, argc, argv);
  try {
    if (synth->parsed()) return cmd_synth(args);
    if (train->parsed()) return cmd_train(args);
    if (score->parsed()) return cmd_score(args);
    if (eval->parsed()) return cmd_eval(args);
    if (ablate->parsed()) return cmd_ablate(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
