#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stc/adam.hpp"
#include "stc/graph.hpp"
#include "stc/training.hpp"

namespace stc {

// Versioned binary checkpoint.
// Layout (little-endian):
//   magic "STCN" | u32 version | i64 iteration
//   u32 config blob length | config blob (key = value text)
//   u32 param count, then per parameter:
//     name (u32 len + bytes) | u32 ndim | i32 dims... | f32 values...
//   two optimizer sections (generator, discriminator), each:
//     i64 step count | u32 entry count, then per entry:
//       name | shape as above | f32 m values | f32 v values
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename V>
void put(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V take(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string take_string(std::istream& in) {
  const auto n = take<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

inline void put_tensor(std::ostream& out, const Tensor<float>& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
  for (int d : t.shape()) put<std::int32_t>(out, d);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
}
inline Tensor<float> take_tensor(std::istream& in) {
  const auto nd = take<std::uint32_t>(in);
  std::vector<int> shape;
  for (std::uint32_t i = 0; i < nd; ++i) shape.push_back(take<std::int32_t>(in));
  Tensor<float> t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor");
  return t;
}

inline void put_optimizer(std::ostream& out, const Adam<float>& opt) {
  put<std::int64_t>(out, opt.step_count());
  const auto snap = opt.snapshot();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(snap.size()));
  for (const auto& [name, mv] : snap) {
    put_string(out, name);
    put_tensor(out, mv.first);
    put_tensor(out, mv.second);
  }
}
inline void take_optimizer(std::istream& in, Adam<float>& opt) {
  opt.set_step_count(take<std::int64_t>(in));
  const auto n = take<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = take_string(in);
    Tensor<float> m = take_tensor(in);
    Tensor<float> v = take_tensor(in);
    opt.restore(name, std::move(m), std::move(v));
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, ParamStore<float>& store,
                            const Adam<float>& gen_opt, const Adam<float>& disc_opt,
                            long long iteration, const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write("STCN", 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::int64_t>(out, iteration);
  detail::put_string(out, config_echo);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, p] : store) {
    detail::put_string(out, name);
    detail::put_tensor(out, p.value);
  }
  detail::put_optimizer(out, gen_opt);
  detail::put_optimizer(out, disc_opt);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

struct LoadedCheckpoint {
  ParamStore<float> store;
  long long iteration = 0;
  std::string config_echo;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path, Adam<float>* gen_opt = nullptr,
                                        Adam<float>* disc_opt = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "STCN") {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto version = detail::take<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  LoadedCheckpoint ck;
  ck.iteration = detail::take<std::int64_t>(in);
  ck.config_echo = detail::take_string(in);
  const auto n = detail::take<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = detail::take_string(in);
    ck.store.create(name, detail::take_tensor(in));
  }
  Adam<float> scratch(typename Adam<float>::Hyper{});
  detail::take_optimizer(in, gen_opt ? *gen_opt : scratch);
  detail::take_optimizer(in, disc_opt ? *disc_opt : scratch);
  return ck;
}

}  // namespace stc
