#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "lprobe/dumpio.hpp"
#include "lprobe/error.hpp"
#include "synth.hpp"

using namespace lprobe;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an lprobe::Error");
  return ErrorKind::Numerical;
}

void put(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("feature dump round trip and header checks") {
  const fs::path dir = testing::fresh_dir("dumpio_feats");
  FeatureDump dump(DumpShape{3, 5, 4});
  for (std::size_t i = 0; i < dump.data().size(); ++i) dump.data()[i] = static_cast<float>(i) * 0.25f - 1.0f;
  write_features(dump, dir / "a.lpd");
  CHECK(read_features(dir / "a.lpd") == dump);
  CHECK(read_feature_shape(dir / "a.lpd") == DumpShape{3, 5, 4});
  CHECK(fs::file_size(dir / "a.lpd") == 16 + 3 * 5 * 4 * 4);

  CHECK(kind_of([&] { read_features(dir / "a.lpd", DumpShape{3, 6, 4}); }) == ErrorKind::Validation);
  CHECK(kind_of([&] { read_features(dir / "missing.lpd"); }) == ErrorKind::Io);

  // Truncated payload.
  fs::copy_file(dir / "a.lpd", dir / "t.lpd");
  fs::resize_file(dir / "t.lpd", fs::file_size(dir / "a.lpd") - 3);
  CHECK(kind_of([&] { read_features(dir / "t.lpd"); }) == ErrorKind::Validation);

  // Bad magic.
  put(dir / "m.lpd", std::string("XXXX") + std::string(12, '\0'));
  CHECK(kind_of([&] { read_features(dir / "m.lpd"); }) == ErrorKind::Validation);

  FeatureDump bad(DumpShape{1, 1, 2});
  bad.data()[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK(kind_of([&] { write_features(bad, dir / "nan.lpd"); }) == ErrorKind::Validation);
  // Patch a NaN into a valid file's payload.
  write_features(FeatureDump(DumpShape{1, 1, 2}), dir / "nan.lpd");
  {
    std::fstream f(dir / "nan.lpd", std::ios::binary | std::ios::in | std::ios::out);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    f.seekp(20);
    f.write(reinterpret_cast<const char*>(&nan), 4);
  }
  CHECK(kind_of([&] { read_features(dir / "nan.lpd"); }) == ErrorKind::Validation);
}

TEST_CASE("alignment parsing and tier validation") {
  const fs::path dir = testing::fresh_dir("dumpio_align");
  Alignment a;
  a.phone.segments = {{"AA", 0.0, 0.1}, {"B", 0.1, 0.25}};
  a.word.segments = {{"hello", 0.0, 0.25}};
  write_alignment(a, dir / "a.tsv");
  CHECK(read_alignment(dir / "a.tsv") == a);

  put(dir / "inv.tsv", "phone\tAA\t0.3\t0.2\n");
  CHECK(kind_of([&] { read_alignment(dir / "inv.tsv"); }) == ErrorKind::Validation);
  put(dir / "ovl.tsv", "phone\tAA\t0.0\t0.2\nphone\tB\t0.1\t0.3\n");
  CHECK(kind_of([&] { read_alignment(dir / "ovl.tsv"); }) == ErrorKind::Validation);
  put(dir / "tier.tsv", "syllable\tAA\t0.0\t0.2\n");
  CHECK(kind_of([&] { read_alignment(dir / "tier.tsv"); }) == ErrorKind::Validation);
  put(dir / "num.tsv", "phone\tAA\t0.0x\t0.2\n");
  CHECK(kind_of([&] { read_alignment(dir / "num.tsv"); }) == ErrorKind::Validation);
  put(dir / "unsorted.tsv", "# comment\nphone\tB\t0.2\t0.3\nphone\tAA\t0.0\t0.2\n");
  const auto sorted = read_alignment(dir / "unsorted.tsv");
  REQUIRE(sorted.phone.segments.size() == 2);
  CHECK(sorted.phone.segments[0].label == "AA");
}

TEST_CASE("prosody track round trip") {
  const fs::path dir = testing::fresh_dir("dumpio_track");
  ProsodyTrack t{{0.0f, 110.0f, 120.5f}, {0.1f, 0.2f, 0.3f}};
  write_track(t, dir / "t.lpt");
  CHECK(read_track(dir / "t.lpt") == t);
  CHECK(kind_of([&] { read_track(dir / "t.lpt", 4); }) == ErrorKind::Validation);
  ProsodyTrack neg{{100.0f}, {-1.0f}};
  CHECK(kind_of([&] { validate_track(neg, "x"); }) == ErrorKind::Validation);
}

TEST_CASE("manifest validation against files on disk") {
  const fs::path root = testing::fresh_dir("dumpio_manifest");
  testing::SynthSpec spec;
  spec.layers = 2;
  spec.dim = 3;
  spec.speakers_per_accent = 1;
  spec.utterances_per_speaker = 1;
  const auto truth = testing::write_dataset(root, spec);
  const Manifest m = read_manifest(root);
  CHECK(m == truth.manifest);
  CHECK(read_manifest(root / "manifest.json") == m);

  // Header disagreeing with the manifest names the utterance.
  Manifest wrong = m;
  wrong.utterances[0].num_frames += 1;
  write_manifest(wrong, root / "manifest.json");
  try {
    read_manifest(root);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find(m.utterances[0].utt_id) != std::string::npos);
  }

  Manifest dup = m;
  dup.utterances.push_back(dup.utterances[0]);
  CHECK(kind_of([&] { validate_manifest(dup); }) == ErrorKind::Validation);
  Manifest hop = m;
  hop.frame_hop_s = 0.0;
  CHECK(kind_of([&] { validate_manifest(hop); }) == ErrorKind::Validation);
  Manifest accent = m;
  accent.utterances[0].accent = "martian";
  CHECK(kind_of([&] { validate_manifest(accent); }) == ErrorKind::Validation);

  write_manifest(m, root / "manifest.json");
  fs::remove(root / m.utterances[0].alignment_path);
  CHECK(kind_of([&] { read_manifest(root); }) == ErrorKind::Validation);
}
