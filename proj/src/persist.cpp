#include "gaplab/persist.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

namespace gaplab {

namespace fs = std::filesystem;

std::string tool_version() { return "0.1.0"; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistError(PersistErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistError(PersistErrorKind::io, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw PersistError(PersistErrorKind::io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}});
  return {{"format_version", format_version}, {"tool_version", tool_version}, {"created_utc", created_utc},
          {"command", command},          {"config", config},             {"master_seed", master_seed},
          {"outputs", outs}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format_version"))
    throw PersistError(PersistErrorKind::corrupt, "manifest: missing format_version");
  RunManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw PersistError(PersistErrorKind::corrupt, std::string("manifest: bad format_version: ") + e.what());
  }
  if (m.format_version != kManifestFormatVersion)
    throw PersistError(PersistErrorKind::version, "manifest format version " + std::to_string(m.format_version) +
                                                      " is not supported (this build reads version " +
                                                      std::to_string(kManifestFormatVersion) + ")");
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.created_utc = j.at("created_utc").get<std::string>();
    m.command = j.value("command", "");
    m.config = j.at("config");
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& o : j.at("outputs"))
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw PersistError(PersistErrorKind::corrupt, std::string("manifest: ") + e.what());
  }
  return m;
}

void record_output(RunManifest& m, const fs::path& dir, const std::string& file) {
  const std::string hash = sha256_file(dir / file);
  for (auto& o : m.outputs)
    if (o.path == file) {
      o.sha256 = hash;
      return;
    }
  m.outputs.push_back({file, hash});
}

void save_manifest(const RunManifest& m, const fs::path& path) { write_text_file(path, m.to_json().dump(2) + "\n"); }

RunManifest load_manifest(const fs::path& path, bool verify_outputs) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw PersistError(PersistErrorKind::corrupt, path.string() + ": " + e.what());
  }
  RunManifest m = RunManifest::from_json(j);
  if (verify_outputs) {
    const fs::path dir = path.parent_path();
    for (const auto& o : m.outputs) {
      const fs::path p = dir / o.path;
      if (!fs::exists(p)) throw PersistError(PersistErrorKind::io, "manifest output missing: " + p.string());
      const std::string actual = sha256_file(p);
      if (actual != o.sha256)
        throw PersistError(PersistErrorKind::hash,
                           "hash mismatch for " + p.string() + ": manifest " + o.sha256 + ", file " + actual);
    }
  }
  return m;
}

namespace {

std::string encode_doubles(const std::vector<double>& v) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(v.size() * 16);
  for (double x : v) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) {
      const auto byte = static_cast<unsigned>((bits >> (8 * b)) & 0xFF);
      out.push_back(hex[byte >> 4]);
      out.push_back(hex[byte & 0xF]);
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::vector<double> decode_doubles(std::string_view body) {
  if (body.size() % 16 != 0) throw PersistError(PersistErrorKind::corrupt, "checkpoint body length is not a multiple of 16");
  std::vector<double> out(body.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      const int hi = hex_value(body[16 * i + 2 * b]), lo = hex_value(body[16 * i + 2 * b + 1]);
      if (hi < 0 || lo < 0) throw PersistError(PersistErrorKind::corrupt, "checkpoint body has a non-hex character");
      bits |= static_cast<std::uint64_t>(hi * 16 + lo) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

std::string checkpoint_text(const MlpScoreModel& m) {
  const std::string body = encode_doubles(m.flat_parameters());
  const nlohmann::json header{{"format", "gaplab-checkpoint"},
                              {"format_version", kCheckpointFormatVersion},
                              {"data_dim", m.data_dim},
                              {"num_classes", m.num_classes},
                              {"frequencies", m.frequencies},
                              {"seed", m.seed},
                              {"p_uncond", m.p_uncond},
                              {"widths", m.widths},
                              {"parameter_count", m.parameter_count()},
                              {"body_sha256", sha256_hex(body)}};
  return header.dump() + "\n" + body + "\n";
}

MlpScoreModel parse_checkpoint(std::string_view text) {
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos) throw PersistError(PersistErrorKind::corrupt, "checkpoint: missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text.substr(0, nl));
  } catch (const nlohmann::json::parse_error& e) {
    throw PersistError(PersistErrorKind::corrupt, std::string("checkpoint header: ") + e.what());
  }
  if (!h.is_object() || h.value("format", "") != "gaplab-checkpoint" || !h.contains("format_version"))
    throw PersistError(PersistErrorKind::corrupt, "checkpoint: not a gaplab checkpoint header");
  const int version = h.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion)
    throw PersistError(PersistErrorKind::version, "checkpoint format version " + std::to_string(version) +
                                                      " is not supported (this build reads version " +
                                                      std::to_string(kCheckpointFormatVersion) + ")");

  std::string_view body = text.substr(nl + 1);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
  const std::string expected = h.value("body_sha256", "");
  const std::string actual = sha256_hex(body);
  if (actual != expected)
    throw PersistError(PersistErrorKind::hash, "checkpoint body hash mismatch: header " + expected + ", body " + actual);

  MlpScoreModel m;
  try {
    m.data_dim = h.at("data_dim").get<std::size_t>();
    m.num_classes = h.at("num_classes").get<int>();
    m.frequencies = h.at("frequencies").get<int>();
    m.seed = h.at("seed").get<std::uint64_t>();
    m.p_uncond = h.at("p_uncond").get<double>();
    m.widths = h.at("widths").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw PersistError(PersistErrorKind::corrupt, std::string("checkpoint header: ") + e.what());
  }
  if (m.widths.size() < 2) throw PersistError(PersistErrorKind::corrupt, "checkpoint: need at least two layer widths");
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    m.weights.emplace_back(m.widths[l + 1] * m.widths[l], 0.0);
    m.biases.emplace_back(m.widths[l + 1], 0.0);
  }
  const std::vector<double> params = decode_doubles(body);
  if (params.size() != m.parameter_count() || params.size() != h.value("parameter_count", std::size_t{0}))
    throw PersistError(PersistErrorKind::corrupt, "checkpoint: parameter count does not match the layer widths");
  m.set_flat_parameters(params);
  return m;
}

void save_checkpoint(const MlpScoreModel& m, const fs::path& path) { write_text_file(path, checkpoint_text(m)); }

MlpScoreModel load_checkpoint(const fs::path& path) { return parse_checkpoint(read_text_file(path)); }

}  // namespace gaplab
