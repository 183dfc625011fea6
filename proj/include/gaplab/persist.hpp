#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gaplab/mlp.hpp"

namespace gaplab {

constexpr int kManifestFormatVersion = 1;
constexpr int kCheckpointFormatVersion = 1;

std::string tool_version();

enum class PersistErrorKind { io, corrupt, version, hash };

class PersistError : public std::runtime_error {
 public:
  PersistError(PersistErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  PersistErrorKind kind() const { return kind_; }

 private:
  PersistErrorKind kind_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view text);

struct OutputRecord {
  std::string path;  // relative to the manifest's directory
  std::string sha256;

  bool operator==(const OutputRecord&) const = default;
};

struct RunManifest {
  int format_version = kManifestFormatVersion;
  std::string tool_version;
  std::string created_utc;
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t master_seed = 0;
  std::vector<OutputRecord> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  bool operator==(const RunManifest&) const = default;
};

std::string utc_timestamp();

/// Hashes `file` (inside `dir`) and adds or replaces its inventory entry.
void record_output(RunManifest& m, const std::filesystem::path& dir, const std::string& file);

void save_manifest(const RunManifest& m, const std::filesystem::path& path);
/// With `verify_outputs`, every listed output is re-hashed and a mismatch
/// raises a hash error.
RunManifest load_manifest(const std::filesystem::path& path, bool verify_outputs = true);

/// First line: JSON header with shape, metadata and the body hash. Second
/// line: parameters as little-endian IEEE-754 doubles in base16.
std::string checkpoint_text(const MlpScoreModel& m);
MlpScoreModel parse_checkpoint(std::string_view text);
void save_checkpoint(const MlpScoreModel& m, const std::filesystem::path& path);
MlpScoreModel load_checkpoint(const std::filesystem::path& path);

}  // namespace gaplab
