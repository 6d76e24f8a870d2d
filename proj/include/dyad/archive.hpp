#pragma once

// Versioned little-endian binary archives for playback recordings and
// trial traces. Doubles are stored bit-for-bit.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dyad/trial.hpp"

namespace dyad::archive {

inline constexpr std::uint32_t kPlaybackVersion = 1;
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::string_view kPlaybackMagic{"DYADPBK\0", 8};
inline constexpr std::string_view kTraceMagic{"DYADTRC\0", 8};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  }

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v)); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void vec(const Vec2& v) {
    f64(v.x);
    f64(v.y);
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

 private:
  template <class U>
  void le(U v) {
    std::array<unsigned char, sizeof(U)> buf;
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf.data(), buf.size());
  }

  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open " + path.string());
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw FormatError("truncated archive: " + path_.string());
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(le<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str() {
    const auto n = count(1 << 20);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Vec2 vec() {
    const double x = f64();
    return {x, f64()};
  }
  // Element count with a sanity cap against corrupt headers.
  std::size_t count(std::uint64_t cap = std::uint64_t{1} << 32) {
    const auto n = u64();
    if (n > cap) throw FormatError("implausible element count in " + path_.string());
    return static_cast<std::size_t>(n);
  }
  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    bytes(got.data(), got.size());
    if (got != magic) throw FormatError(path_.string() + " is not a " + std::string(magic.substr(0, 7)) + " archive");
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in " + path_.string());
  }

 private:
  template <class U>
  U le() {
    std::array<unsigned char, sizeof(U)> buf;
    bytes(buf.data(), buf.size());
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  std::ifstream in_;
  std::filesystem::path path_;
};

struct PlaybackFile {
  std::string config_hash;
  experiments::Playback playback;
};

inline void write_playback(const std::filesystem::path& path, const PlaybackFile& file) {
  Writer w(path);
  w.bytes(kPlaybackMagic.data(), kPlaybackMagic.size());
  w.u32(kPlaybackVersion);
  w.str(file.config_hash);
  const auto& pb = file.playback;
  w.str(pb.source_run);
  w.i64(pb.generation);
  w.u64(pb.agent);
  w.u64(pb.trials.size());
  for (const auto& t : pb.trials) {
    w.f64(t.relative_angle);
    w.vec(t.start);
    w.f64(t.start_heading);
    w.u64(t.frames.size());
    for (const auto& f : t.frames) {
      w.vec(f.center);
      w.f64(f.heading);
      w.vec(f.velocity);
      w.f64(f.emission);
    }
  }
  w.finish();
}

inline PlaybackFile read_playback(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kPlaybackMagic);
  if (const auto v = r.u32(); v != kPlaybackVersion) {
    throw FormatError("unsupported playback format version " + std::to_string(v));
  }
  PlaybackFile file;
  file.config_hash = r.str();
  auto& pb = file.playback;
  pb.source_run = r.str();
  pb.generation = r.i64();
  pb.agent = static_cast<std::size_t>(r.u64());
  pb.trials.resize(r.count(64));
  for (auto& t : pb.trials) {
    t.relative_angle = r.f64();
    t.start = r.vec();
    t.start_heading = r.f64();
    t.frames.resize(r.count());
    for (auto& f : t.frames) {
      f.center = r.vec();
      f.heading = r.f64();
      f.velocity = r.vec();
      f.emission = r.f64();
    }
  }
  r.expect_end();
  return file;
}

struct TraceFile {
  std::string run_id;
  std::string config_hash;
  std::vector<experiments::TrialTrace> traces;
};

inline void write_traces(const std::filesystem::path& path, const TraceFile& file) {
  Writer w(path);
  w.bytes(kTraceMagic.data(), kTraceMagic.size());
  w.u32(kTraceVersion);
  w.str(file.run_id);
  w.str(file.config_hash);
  w.u64(file.traces.size());
  for (const auto& t : file.traces) {
    w.u8(static_cast<std::uint8_t>(t.condition));
    w.u64(t.trial_index);
    w.f64(t.spec.initial_distance);
    w.f64(t.spec.relative_angle);
    w.f64(t.spec.initial_heading);
    w.u64(t.spec.duration_steps);
    w.f64(t.spec.dt);
    w.u8(static_cast<std::uint8_t>(t.spec.plateau));
    w.u64(t.agents.size());
    for (const auto& a : t.agents) {
      w.u8(a.ghost ? 1 : 0);
      w.u64(a.steps.size());
      for (const auto& s : a.steps) {
        w.vec(s.center);
        w.f64(s.heading);
        w.vec(s.velocity);
        for (double n : s.neural) w.f64(n);
        w.f64(s.emission);
      }
    }
  }
  w.finish();
}

inline TraceFile read_traces(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kTraceMagic);
  if (const auto v = r.u32(); v != kTraceVersion) {
    throw FormatError("unsupported trace format version " + std::to_string(v));
  }
  TraceFile file;
  file.run_id = r.str();
  file.config_hash = r.str();
  file.traces.resize(r.count(1024));
  for (auto& t : file.traces) {
    const auto cond = r.u8();
    if (cond > static_cast<std::uint8_t>(experiments::Condition::Isolated)) throw FormatError("bad condition tag");
    t.condition = static_cast<experiments::Condition>(cond);
    t.trial_index = static_cast<std::size_t>(r.u64());
    t.spec.initial_distance = r.f64();
    t.spec.relative_angle = r.f64();
    t.spec.initial_heading = r.f64();
    t.spec.duration_steps = static_cast<std::size_t>(r.u64());
    t.spec.dt = r.f64();
    t.spec.plateau = static_cast<physics::PlateauMode>(r.u8());
    t.agents.resize(r.count(16));
    for (auto& a : t.agents) {
      a.ghost = r.u8() != 0;
      a.steps.resize(r.count());
      for (auto& s : a.steps) {
        s.center = r.vec();
        s.heading = r.f64();
        s.velocity = r.vec();
        for (double& n : s.neural) n = r.f64();
        s.emission = r.f64();
      }
    }
  }
  r.expect_end();
  return file;
}

}  // namespace dyad::archive
