#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stc/adam.hpp"
#include "stc/data.hpp"
#include "stc/discriminator.hpp"
#include "stc/generator.hpp"
#include "stc/losses.hpp"

namespace stc {

struct TrainConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  LossWeights weights;
  double gen_lr = 3e-4;
  double disc_lr = 3e-5;
  int batch_size = 4;
  long long iterations = 1000;
  RssSchedule rss;
  unsigned seed = 0;
  bool adversarial = true;
  bool bidirectional = true;
  double clip_norm = 10.0;

  void validate() const {
    if (gen_lr <= 0 || disc_lr <= 0 || batch_size < 1 || iterations < 1) {
      throw std::invalid_argument("train config: rates and budget must be positive");
    }
    generator.validate();
  }
};

// Flat `key = value` config files, '#' comments.
inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  auto geti = [&](const char* k, int d) {
    auto it = kv.find(k);
    return it == kv.end() ? d : std::stoi(it->second);
  };
  auto getll = [&](const char* k, long long d) {
    auto it = kv.find(k);
    return it == kv.end() ? d : std::stoll(it->second);
  };
  auto getd = [&](const char* k, double d) {
    auto it = kv.find(k);
    return it == kv.end() ? d : std::stod(it->second);
  };
  auto getb = [&](const char* k, bool d) {
    auto it = kv.find(k);
    if (it == kv.end()) return d;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error(std::string("config: bad boolean for ") + k);
  };
  c.generator.num_layers = geti("layers", c.generator.num_layers);
  c.generator.hidden = geti("hidden", c.generator.hidden);
  c.generator.kernel = geti("kernel", c.generator.kernel);
  c.generator.patch = geti("patch", c.generator.patch);
  c.generator.context = geti("context", c.generator.context);
  c.generator.horizon = geti("horizon", c.generator.horizon);
  c.generator.frame_channels = geti("frame_channels", c.generator.frame_channels);
  c.discriminator.sequence_length = c.generator.horizon;
  c.discriminator.frame_channels = c.generator.frame_channels;
  if (kv.count("disc_channels")) {
    c.discriminator.channels.clear();
    std::istringstream is(kv.at("disc_channels"));
    std::string tok;
    while (std::getline(is, tok, ',')) c.discriminator.channels.push_back(std::stoi(tok));
  }
  c.weights.intensity = getd("lambda_int", c.weights.intensity);
  c.weights.gradient = getd("lambda_gd", c.weights.gradient);
  c.weights.adversarial = getd("lambda_adv", c.weights.adversarial);
  c.weights.decouple = getd("lambda_dec", c.weights.decouple);
  c.gen_lr = getd("gen_lr", c.gen_lr);
  c.disc_lr = getd("disc_lr", c.disc_lr);
  c.batch_size = geti("batch_size", c.batch_size);
  c.iterations = getll("iterations", c.iterations);
  c.rss.start_prob = getd("rss_start_prob", c.rss.start_prob);
  c.rss.end_prob = getd("rss_end_prob", c.rss.end_prob);
  c.rss.ramp_iters = getll("rss_ramp_iters", c.rss.ramp_iters);
  c.seed = static_cast<unsigned>(getll("seed", c.seed));
  c.adversarial = getb("adversarial", c.adversarial);
  c.bidirectional = getb("bidirectional", c.bidirectional);
  c.clip_norm = getd("clip_norm", c.clip_norm);
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  return train_config_from_kv(parse_kv_file(path));
}

// Owns the parameter store, both optimizers and the iteration counter.
template <typename T>
class Trainer {
 public:
  Trainer(TrainConfig cfg, const std::vector<VideoSequence<T>>& train_videos)
      : cfg_(std::move(cfg)), videos_(train_videos), rng_(cfg_.seed) {
    cfg_.validate();
    if (videos_.empty()) throw std::invalid_argument("trainer: no training videos");
    const WindowSpec spec = window_spec();
    for (std::size_t v = 0; v < videos_.size(); ++v) {
      for (int t : iter_windows(videos_[v].length(), spec)) {
        window_index_.emplace_back(static_cast<int>(v), t);
      }
    }
    if (window_index_.empty()) {
      throw std::invalid_argument("trainer: no eligible windows (videos too short)");
    }
    // one throwaway recording graph materializes all parameters
    Graph<T> g;
    GeneratorNet<T> gen(g, store_, cfg_.generator, rng_);
    DiscriminatorNet<T> disc(g, store_, cfg_.discriminator, rng_);
    gen_opt_ = std::make_unique<Adam<T>>(
        typename Adam<T>::Hyper{static_cast<T>(cfg_.gen_lr), T(0.9), T(0.999), T(1e-8)});
    disc_opt_ = std::make_unique<Adam<T>>(
        typename Adam<T>::Hyper{static_cast<T>(cfg_.disc_lr), T(0.9), T(0.999), T(1e-8)});
    gen_names_ = store_.names_with_prefix(GeneratorNet<T>::kPrefix);
    disc_names_ = store_.names_with_prefix(DiscriminatorNet<T>::kPrefix);
  }

  WindowSpec window_spec() const {
    return WindowSpec{cfg_.generator.context, cfg_.generator.horizon, 1};
  }

  const TrainConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  long long iteration() const { return iteration_; }
  Adam<T>& generator_optimizer() { return *gen_opt_; }
  Adam<T>& discriminator_optimizer() { return *disc_opt_; }

  // One alternating update: generator step on the full objective, then a
  // discriminator step on the detached predictions (skipped with the
  // adversarial flag off).
  LossBundle<T> train_step() {
    WindowBatch<T> batch = sample_batch();
    std::vector<bool> ctx =
        reverse_scheduled_mask(iteration_, cfg_.generator.context, cfg_.rss, rng_);
    LossBundle<T> bundle;

    std::vector<Tensor<T>> detached_phat;
    {
      Graph<T> g;
      GeneratorNet<T> gen(g, store_, cfg_.generator, rng_);
      PredictOutput<T> out = gen.predict_window(batch, ctx, cfg_.bidirectional);
      std::vector<Value> targets;
      for (const auto& t : batch.targets) targets.push_back(g.leaf(t));
      Value l_int = intensity_loss(g, out.frames, targets);
      Value l_gd = gradient_loss(g, out.frames, targets);
      Value l_dec = decouple_loss(g, out.increments);
      Value l_adv{};
      if (cfg_.adversarial) {
        DiscriminatorNet<T> disc(g, store_, cfg_.discriminator, rng_);
        l_adv = lsgan_g_loss(g, disc.discriminate(out.frames));
        bundle.adversarial_g = g.val(l_adv)[0];
      }
      LossWeights w = cfg_.weights;
      if (!cfg_.adversarial) w.adversarial = 0.0;
      Value total = generator_total_loss(g, l_int, l_gd, l_adv, l_dec, w);
      bundle.intensity = g.val(l_int)[0];
      bundle.gradient = g.val(l_gd)[0];
      bundle.decouple = g.val(l_dec)[0];
      bundle.total_g = g.val(total)[0];
      check_finite(bundle.total_g, "generator");
      g.backward(total);
      clip_grad_norm(store_, gen_names_, static_cast<T>(cfg_.clip_norm));
      gen_opt_->step(store_, gen_names_);
      store_.zero_grads();
      for (Value v : out.frames) detached_phat.push_back(g.val(v));
    }

    if (cfg_.adversarial) {
      Graph<T> g;
      DiscriminatorNet<T> disc(g, store_, cfg_.discriminator, rng_);
      std::vector<Value> real, fake;
      for (const auto& t : batch.targets) real.push_back(g.leaf(t));
      for (const auto& t : detached_phat) fake.push_back(g.leaf(t));
      Value loss = lsgan_d_loss(g, disc.discriminate(real), disc.discriminate(fake));
      bundle.total_d = g.val(loss)[0];
      check_finite(bundle.total_d, "discriminator");
      g.backward(loss);
      clip_grad_norm(store_, disc_names_, static_cast<T>(cfg_.clip_norm));
      disc_opt_->step(store_, disc_names_);
      store_.zero_grads();
    }

    ++iteration_;
    return bundle;
  }

  // Runs the remaining budget, appending one CSV row per iteration to
  // `log` when given.
  std::vector<LossBundle<T>> run(std::ostream* log = nullptr) {
    std::vector<LossBundle<T>> trace;
    if (log && iteration_ == 0) {
      *log << "iteration,L_int,L_gd,L_adv_g,L_dec,L_G,L_D\n";
    }
    while (iteration_ < cfg_.iterations) {
      LossBundle<T> b = train_step();
      if (log) {
        *log << iteration_ - 1 << ',' << b.intensity << ',' << b.gradient << ','
             << b.adversarial_g << ',' << b.decouple << ',' << b.total_g << ',' << b.total_d
             << "\n";
      }
      trace.push_back(b);
    }
    return trace;
  }

 private:
  void check_finite(T loss, const char* which) const {
    if (!std::isfinite(loss)) {
      throw std::runtime_error(std::string("non-finite ") + which + " loss at iteration " +
                               std::to_string(iteration_));
    }
  }

  WindowBatch<T> sample_batch() {
    std::uniform_int_distribution<std::size_t> pick(0, window_index_.size() - 1);
    std::vector<std::pair<int, int>> picks;
    for (int b = 0; b < cfg_.batch_size; ++b) picks.push_back(window_index_[pick(rng_)]);
    return make_window_batch(videos_, picks, window_spec());
  }

  TrainConfig cfg_;
  std::vector<VideoSequence<T>> videos_;
  std::mt19937 rng_;
  ParamStore<T> store_;
  std::unique_ptr<Adam<T>> gen_opt_, disc_opt_;
  std::vector<std::string> gen_names_, disc_names_;
  std::vector<std::pair<int, int>> window_index_;
  long long iteration_ = 0;
};

}  // namespace stc
