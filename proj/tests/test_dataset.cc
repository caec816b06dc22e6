/*
 * Copyright 2026 The EmoHRNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "audio.h"
#include "dataset.h"
#include "error.h"
#include "test_util.h"

namespace emohrnet {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << "x";
}

std::string ravdess_name(int emotion, int actor, int repetition = 1, int channel = 1) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "03-%02d-%02d-01-01-%02d-%02d.wav", channel, emotion,
                repetition, actor);
  return buf;
}

TEST_CASE("schemas") {
  CHECK(schema_by_name("ravdess").labels ==
        std::vector<std::string>{"neutral", "calm", "happy", "sad", "angry", "fearful",
                                 "disgust", "surprised"});
  CHECK(schema_by_name("iemocap").labels ==
        std::vector<std::string>{"happiness", "anger", "sadness", "frustration", "neutral"});
  CHECK(schema_by_name("emovo").size() == 7);
  CHECK(schema_by_name("ravdess7").size() == 7);
  CHECK_THROWS_AS(schema_by_name("tess"), Error);
}

TEST_CASE("RAVDESS filenames") {
  const RavdessInfo a = parse_ravdess_filename("03-01-05-01-02-01-12.wav");
  CHECK(a.class_id == 4);
  CHECK(schema_by_name("ravdess").labels[a.class_id] == "angry");
  CHECK(a.actor == 12);
  CHECK(a.statement == 2);
  CHECK(parse_ravdess_filename("/x/y/03-01-01-01-01-01-01.wav").class_id == 0);
  CHECK(parse_ravdess_filename("03-01-08-02-01-01-24.WAV").class_id == 7);
  CHECK(parse_ravdess_filename("03-01-02-01-01-01-01.wav", true).class_id == 0);
  CHECK(parse_ravdess_filename("03-01-05-01-01-01-01.wav", true).class_id == 3);
  CHECK_THROWS_AS(parse_ravdess_filename("03-01-05-01-02-12.wav"), Error);
  CHECK_THROWS_AS(parse_ravdess_filename("03-01-09-01-02-01-12.wav"), Error);
  CHECK_THROWS_AS(parse_ravdess_filename("03-01-0a-01-02-01-12.wav"), Error);
}

TEST_CASE("EMOVO filenames") {
  CHECK(parse_emovo_filename("dis-f1-b1.wav").class_id == 0);
  CHECK(parse_emovo_filename("pau-m2-l3.wav").class_id == 1);
  CHECK(parse_emovo_filename("rab-f3-n5.wav").class_id == 2);
  CHECK(parse_emovo_filename("gio-m1-d1.wav").class_id == 3);
  CHECK(parse_emovo_filename("sor-m3-b2.wav").class_id == 4);
  CHECK(parse_emovo_filename("tri-f2-l1.wav").class_id == 5);
  const EmovoInfo n = parse_emovo_filename("neu-f2-l1.wav");
  CHECK(n.class_id == 6);
  CHECK(n.speaker == "f2");
  CHECK_THROWS_AS(parse_emovo_filename("xxx-f2-l1.wav"), Error);
  CHECK_THROWS_AS(parse_emovo_filename("neu-f2.wav"), Error);
}

TEST_CASE("split sizes use largest remainder") {
  CHECK(split_sizes(10, {}) == std::array<std::size_t, 3>{7, 1, 2});
  CHECK(split_sizes(100, {}) == std::array<std::size_t, 3>{70, 15, 15});
  CHECK(split_sizes(3, {}) == std::array<std::size_t, 3>{2, 0, 1});
  CHECK(split_sizes(0, {}) == std::array<std::size_t, 3>{0, 0, 0});
  for (std::size_t n = 0; n < 50; ++n) {
    const auto s = split_sizes(n, {0.6, 0.25, 0.15, true});
    CHECK(s[0] + s[1] + s[2] == n);
  }
}

TEST_CASE("manifest from a 10-file directory") {
  TempDir dir("dataset");
  for (int i = 0; i < 10; ++i) touch(dir / "a" / ravdess_name(1 + i % 8, 1 + i % 2, 1 + i));
  touch(dir / "a" / "03-01-05-01-02-12.wav");  // six fields
  touch(dir / "notes.txt");
  SplitPolicy policy;
  policy.speaker_disjoint = false;
  const ManifestBuild b = build_manifest(dir.path(), "ravdess", policy, 3);
  CHECK(b.skipped == 1);
  REQUIRE(b.manifest.rows.size() == 10);
  CHECK(b.manifest.split_rows(Split::kTrain).size() == 7);
  CHECK(b.manifest.split_rows(Split::kVal).size() == 1);
  CHECK(b.manifest.split_rows(Split::kTest).size() == 2);
  CHECK(build_manifest(dir.path(), "ravdess", policy, 3).manifest == b.manifest);
  CHECK_NOTHROW(b.manifest.validate());

  std::set<std::string> all;
  for (const ManifestRow& r : b.manifest.rows) all.insert(r.path);
  std::set<std::string> joined;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest})
    for (const ManifestRow& r : b.manifest.split_rows(s)) CHECK(joined.insert(r.path).second);
  CHECK(joined == all);
}

TEST_CASE("speaker-disjoint split") {
  TempDir dir("dataset");
  for (int actor = 1; actor <= 10; ++actor)
    for (int e = 1; e <= 8; ++e) touch(dir / ravdess_name(e, actor));
  const ManifestBuild b = build_manifest(dir.path(), "ravdess", {}, 9);
  REQUIRE(b.manifest.rows.size() == 80);
  std::map<int, std::set<Split>> splits_of;
  for (const ManifestRow& r : b.manifest.rows)
    splits_of[parse_ravdess_filename(r.path).actor].insert(r.split);
  for (const auto& [actor, s] : splits_of) CHECK(s.size() == 1);
  CHECK(b.manifest.split_rows(Split::kTrain).size() == 56);
  CHECK(b.manifest.split_rows(Split::kVal).size() == 8);
  CHECK(b.manifest.split_rows(Split::kTest).size() == 16);
  ScanOptions speech_only;
  speech_only.include_song = false;
  touch(dir / ravdess_name(3, 4, 1, 2));
  CHECK(build_manifest(dir.path(), "ravdess", {}, 9, speech_only).manifest.rows.size() == 80);
}

TEST_CASE("manifest build errors") {
  TempDir dir("dataset");
  CHECK_THROWS_AS(build_manifest(dir.path(), "ravdess", {}, 1), Error);
  CHECK_THROWS_AS(build_manifest(dir / "missing", "ravdess", {}, 1), Error);
  touch(dir / ravdess_name(1, 1));
  CHECK_THROWS_AS(build_manifest(dir.path(), "iemocap", {}, 1), Error);
}

TEST_CASE("manifest TSV round-trip") {
  Manifest m;
  m.schema = "emovo";
  m.rows = {{"a/dis-f1-b1.wav", 0, Split::kTrain, "dis-f1-b1"},
            {"b c/neu-m1-b1.wav", 6, Split::kVal, "neu-m1-b1"},
            {"/abs/tri-f2-l1.wav", 5, Split::kTest, "tri-f2-l1"}};
  const std::string text = format_manifest(m);
  const Manifest back = parse_manifest(text);
  CHECK(back == m);
  CHECK(format_manifest(back) == text);
  CHECK_THROWS_AS(parse_manifest("# schema: emovo\nx.wav\t9\ttrain\tx\n").validate(), Error);
  CHECK_THROWS_AS(parse_manifest("x.wav\t1\tholdout\tx\n"), Error);
  CHECK_THROWS_AS(parse_manifest("x.wav\t1\n"), Error);

  TempDir dir("dataset");
  write_manifest(dir / "m.tsv", m);
  const Manifest read = read_manifest(dir / "m.tsv");
  CHECK(read.rows[0].path == (dir / "a/dis-f1-b1.wav").string());
  CHECK(read.rows[2].path == "/abs/tri-f2-l1.wav");
}

std::vector<Example> numbered_examples(std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix m(2, 3, static_cast<double>(i));
    out.push_back({"ex" + std::to_string(i), m, i % 4});
  }
  return out;
}

TEST_CASE("batching 130 samples by 64") {
  const std::vector<Example> ex = numbered_examples(130);
  const std::vector<Batch> batches = batch_iter(ex, 64, 1, 0, true, 4);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].input.shape() == Shape{64, 1, 2, 3});
  CHECK(batches[1].input.dim(0) == 64);
  CHECK(batches[2].input.dim(0) == 2);
  std::multiset<std::string> seen;
  for (const Batch& b : batches) {
    for (std::size_t r = 0; r < b.ids.size(); ++r) {
      seen.insert(b.ids[r]);
      double ones = 0.0;
      std::size_t hot = 99;
      for (std::size_t k = 0; k < 4; ++k) {
        const double v = b.labels[r * 4 + k];
        CHECK((v == 0.0 || v == 1.0));
        ones += v;
        if (v == 1.0) hot = k;
      }
      CHECK(ones == 1.0);
      const std::size_t id = std::stoul(b.ids[r].substr(2));
      CHECK(hot == id % 4);
      CHECK(b.input[r * 6] == static_cast<double>(id));
    }
  }
  CHECK(seen.size() == 130);
  CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 130);
}

TEST_CASE("epoch order") {
  const std::vector<std::size_t> identity = epoch_order(20, 5, 3, false);
  for (std::size_t i = 0; i < 20; ++i) CHECK(identity[i] == i);
  const std::vector<std::size_t> a = epoch_order(20, 5, 3, true);
  CHECK(a == epoch_order(20, 5, 3, true));
  CHECK(a != epoch_order(20, 5, 4, true));
  CHECK(a != epoch_order(20, 6, 3, true));
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == identity);

  const std::vector<Example> ex = numbered_examples(10);
  const std::vector<Batch> unshuffled = batch_iter(ex, 4, 5, 0, false, 4);
  std::vector<std::string> ids;
  for (const Batch& b : unshuffled) ids.insert(ids.end(), b.ids.begin(), b.ids.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(ids[i] == ex[i].id);
  CHECK_THROWS_AS(one_hot(std::vector<std::size_t>{4}, 4), Error);
}

TEST_CASE("manifest batching loads audio and reports unreadable files") {
  TempDir dir("dataset");
  const fs::path path = testing::write_fixture_corpus(dir.path(), true);
  const Manifest m = read_manifest(path);
  const std::vector<Batch> a =
      batch_iter(m, Split::kTrain, testing::fixture_dsp(), 32, 5, 2, 1, true);
  const std::vector<Batch> b =
      batch_iter(m, Split::kTrain, testing::fixture_dsp(), 32, 5, 2, 1, true);
  REQUIRE(a.size() == 3);
  CHECK(a[0].input.shape() == Shape{5, 1, 16, 32});
  CHECK(a[0].labels.shape() == Shape{5, 8});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].ids == b[i].ids);

  fs::remove(dir / "audio" / "clip0.wav");
  try {
    load_examples(m, Split::kTrain, testing::fixture_dsp(), 32);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNotFound);
    CHECK(std::string(e.what()).find("clip0.wav") != std::string::npos);
  }
}

}  // namespace
}  // namespace emohrnet
