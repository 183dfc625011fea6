#include <gtest/gtest.h>

#include <filesystem>
#include <functional>

#include "gaplab/persist.hpp"

using namespace gaplab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path p = fs::temp_directory_path() / "gaplab_tests" / (std::string(info->test_suite_name()) + "_" + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PersistErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const PersistError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no PersistError thrown";
  return PersistErrorKind::io;
}

RunManifest sample_manifest() {
  RunManifest m;
  m.tool_version = tool_version();
  m.created_utc = "2026-01-02T03:04:05Z";
  m.command = "sample";
  m.config = {{"seed", 7}, {"schedule", {{"T", 10}}}};
  m.master_seed = 7;
  return m;
}

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, RoundtripAndByteStability) {
  const auto dir = scratch_dir();
  write_text_file(dir / "a.csv", "x\n1\n");
  RunManifest m = sample_manifest();
  record_output(m, dir, "a.csv");
  EXPECT_EQ(m.outputs.size(), 1u);
  EXPECT_EQ(m.outputs[0].sha256, sha256_hex("x\n1\n"));
  record_output(m, dir, "a.csv");  // replaces, does not duplicate
  EXPECT_EQ(m.outputs.size(), 1u);
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back, m);
  save_manifest(back, dir / "again.json");
  EXPECT_EQ(read_text_file(dir / "manifest.json"), read_text_file(dir / "again.json"));
}

TEST(Manifest, OutputHashesVerifyOnLoad) {
  const auto dir = scratch_dir();
  write_text_file(dir / "a.csv", "x\n1\n");
  RunManifest m = sample_manifest();
  record_output(m, dir, "a.csv");
  save_manifest(m, dir / "manifest.json");
  write_text_file(dir / "a.csv", "x\n2\n");
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "manifest.json"); }), PersistErrorKind::hash);
  EXPECT_NO_THROW(load_manifest(dir / "manifest.json", false));
  fs::remove(dir / "a.csv");
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "manifest.json"); }), PersistErrorKind::io);
}

TEST(Manifest, FutureVersionNamesBothVersions) {
  const auto dir = scratch_dir();
  auto j = sample_manifest().to_json();
  j["format_version"] = 99;
  write_text_file(dir / "manifest.json", j.dump());
  try {
    load_manifest(dir / "manifest.json");
    FAIL() << "expected a version error";
  } catch (const PersistError& e) {
    EXPECT_EQ(e.kind(), PersistErrorKind::version);
    const std::string what = e.what();
    EXPECT_NE(what.find("99"), std::string::npos);
    EXPECT_NE(what.find(std::to_string(kManifestFormatVersion)), std::string::npos);
  }
}

TEST(Manifest, CorruptInputs) {
  const auto dir = scratch_dir();
  write_text_file(dir / "bad.json", "{not json");
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "bad.json"); }), PersistErrorKind::corrupt);
  write_text_file(dir / "bad.json", R"({"format_version": 1})");
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "bad.json"); }), PersistErrorKind::corrupt);
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "missing.json"); }), PersistErrorKind::io);
}

TEST(Checkpoint, RoundtripIsExact) {
  const auto dir = scratch_dir();
  MlpScoreModel m = make_mlp(2, 3, {7, 5}, 11, false);
  m.p_uncond = 0.2;
  save_checkpoint(m, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.flat_parameters(), m.flat_parameters());
  EXPECT_EQ(checkpoint_text(back), read_text_file(dir / "m.ckpt"));
}

TEST(Checkpoint, FlippedBodyByteIsHashError) {
  const auto m = make_mlp(1, 2, {4}, 3, false);
  std::string text = checkpoint_text(m);
  const auto body = text.find('\n') + 1;
  for (std::size_t pos : {body, body + 17, text.size() - 2}) {
    std::string bad = text;
    bad[pos] = bad[pos] == '0' ? '1' : '0';
    EXPECT_EQ(kind_of([&] { parse_checkpoint(bad); }), PersistErrorKind::hash) << pos;
  }
}

TEST(Checkpoint, VersionAndCorruption) {
  const auto m = make_mlp(1, 2, {4}, 3, false);
  const std::string text = checkpoint_text(m);
  const auto nl = text.find('\n');
  auto header = nlohmann::json::parse(text.substr(0, nl));

  auto future = header;
  future["format_version"] = 5;
  try {
    parse_checkpoint(future.dump() + text.substr(nl));
    FAIL() << "expected a version error";
  } catch (const PersistError& e) {
    EXPECT_EQ(e.kind(), PersistErrorKind::version);
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(std::to_string(kCheckpointFormatVersion)), std::string::npos);
  }

  EXPECT_EQ(kind_of([&] { parse_checkpoint("no newline here"); }), PersistErrorKind::corrupt);
  EXPECT_EQ(kind_of([&] { parse_checkpoint("{bad json\nabcd"); }), PersistErrorKind::corrupt);
  auto other = header;
  other["format"] = "something-else";
  EXPECT_EQ(kind_of([&] { parse_checkpoint(other.dump() + text.substr(nl)); }), PersistErrorKind::corrupt);

  // A self-consistent hash over a body that is not hex is still rejected.
  const std::string junk = "zz" + std::string(14, '0');
  auto rehashed = header;
  rehashed["body_sha256"] = sha256_hex(junk);
  EXPECT_EQ(kind_of([&] { parse_checkpoint(rehashed.dump() + "\n" + junk); }), PersistErrorKind::corrupt);
  auto wrong_count = header;
  wrong_count["parameter_count"] = 3;
  EXPECT_EQ(kind_of([&] { parse_checkpoint(wrong_count.dump() + text.substr(nl)); }), PersistErrorKind::corrupt);
}

TEST(WriteTextFile, ReplacesAtomically) {
  const auto dir = scratch_dir();
  write_text_file(dir / "f.txt", "one");
  write_text_file(dir / "f.txt", "two");
  EXPECT_EQ(read_text_file(dir / "f.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "f.txt.tmp"));
  EXPECT_EQ(sha256_file(dir / "f.txt"), sha256_hex("two"));
}
