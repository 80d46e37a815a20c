#pragma once

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vcstar/features.hpp"

namespace vcstar {

enum class io_errc { bad_magic, size_mismatch, non_finite, bad_value };

struct feature_io_error : data_error {
  io_errc code;
  feature_io_error(io_errc c, const std::string& msg) : data_error(msg), code(c) {}
};

namespace io_detail {

static_assert(std::endian::native == std::endian::little,
              "feature files are little-endian; big-endian hosts need swaps");

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <class T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size())
    throw feature_io_error(io_errc::size_mismatch, "feature file: payload size mismatch");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write file: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw data_error("short write: " + path.string());
}

}  // namespace io_detail

struct feature_meta {
  std::string speaker;
  std::string provenance;
};

// Binary layout: "VCF1", u32 Q, u32 T, f64 frame_period_ms, Q*T f32 mcep
// (dimension-major), T f32 log F0, T u8 voicing mask, u32 AP blob length +
// blob. All integers and floats little-endian.
inline void feature_io_save(const feature_sequence& x,
                            const std::filesystem::path& path,
                            const feature_meta& meta = {}) {
  x.validate();
  std::string buf;
  buf.reserve(24 + x.mcep.size() * 4 + x.t * 5 + x.ap_ref.size());
  buf.append("VCF1", 4);
  io_detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(x.q));
  io_detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(x.t));
  io_detail::put<double>(buf, x.frame_period_ms);
  for (double v : x.mcep) io_detail::put<float>(buf, static_cast<float>(v));
  for (double v : x.log_f0) io_detail::put<float>(buf, static_cast<float>(v));
  for (std::uint8_t v : x.voiced) io_detail::put<std::uint8_t>(buf, v);
  io_detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(x.ap_ref.size()));
  buf.append(x.ap_ref);
  io_detail::write_file(path, buf);

  nlohmann::json side;
  side["speaker"] = meta.speaker;
  side["provenance"] = meta.provenance;
  side["q"] = x.q;
  side["t"] = x.t;
  std::filesystem::path meta_path = path;
  meta_path.replace_extension(".meta.json");
  io_detail::write_file(meta_path, side.dump(2) + "\n");
}

inline feature_sequence feature_io_load(const std::filesystem::path& path) {
  const std::string buf = io_detail::read_file(path);
  if (buf.size() < 4 || buf.compare(0, 4, "VCF1") != 0)
    throw feature_io_error(io_errc::bad_magic, "feature file: bad magic");
  std::size_t pos = 4;
  feature_sequence x;
  x.q = io_detail::take<std::uint32_t>(buf, pos);
  x.t = io_detail::take<std::uint32_t>(buf, pos);
  x.frame_period_ms = io_detail::take<double>(buf, pos);
  if (x.q < 1 || x.t < 1)
    throw feature_io_error(io_errc::bad_value, "feature file: empty dimensions");
  x.mcep.resize(x.q * x.t);
  for (double& v : x.mcep) v = io_detail::take<float>(buf, pos);
  x.log_f0.resize(x.t);
  for (double& v : x.log_f0) v = io_detail::take<float>(buf, pos);
  x.voiced.resize(x.t);
  for (std::uint8_t& v : x.voiced) v = io_detail::take<std::uint8_t>(buf, pos);
  const std::uint32_t ap_len = io_detail::take<std::uint32_t>(buf, pos);
  if (pos + ap_len > buf.size())
    throw feature_io_error(io_errc::size_mismatch, "feature file: payload size mismatch");
  x.ap_ref = buf.substr(pos, ap_len);
  pos += ap_len;
  if (pos != buf.size())
    throw feature_io_error(io_errc::size_mismatch, "feature file: trailing bytes");
  for (double v : x.mcep)
    if (!is_finite(v))
      throw feature_io_error(io_errc::non_finite, "feature file: non-finite payload");
  for (std::size_t i = 0; i < x.t; ++i)
    if (x.voiced[i] && !is_finite(x.log_f0[i]))
      throw feature_io_error(io_errc::non_finite, "feature file: non-finite payload");
  return x;
}

inline nlohmann::json stats_to_json(const speaker_stats& s) {
  nlohmann::json j;
  j["mcep_mean"] = s.mcep_mean;
  j["mcep_std"] = s.mcep_std;
  j["logf0_mean"] = s.logf0_mean;
  j["logf0_std"] = s.logf0_std;
  return j;
}

inline speaker_stats stats_from_json(const nlohmann::json& j) {
  speaker_stats s;
  s.mcep_mean = j.at("mcep_mean").get<std::vector<double>>();
  s.mcep_std = j.at("mcep_std").get<std::vector<double>>();
  s.logf0_mean = j.at("logf0_mean").get<double>();
  s.logf0_std = j.at("logf0_std").get<double>();
  if (s.mcep_mean.size() != s.mcep_std.size())
    throw data_error("speaker stats: mean/std length mismatch");
  return s;
}

inline void stats_save(const speaker_stats& s, const std::filesystem::path& path) {
  io_detail::write_file(path, stats_to_json(s).dump(2) + "\n");
}

inline speaker_stats stats_load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io_detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("speaker stats: malformed JSON: " + std::string(e.what()));
  }
  return stats_from_json(j);
}

}  // namespace vcstar
