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

#include <fstream>
#include <string>

#include "config.h"
#include "error.h"
#include "test_util.h"

namespace emohrnet {
namespace {

bool rejects(std::string_view text) {
  try {
    parse_engine_config(text);
  } catch (const Error& e) {
    return e.kind() == ErrorKind::kInvalidArgument;
  }
  return false;
}

TEST_CASE("defaults") {
  const EngineConfig c = parse_engine_config("{}");
  CHECK(c == EngineConfig{});
  CHECK(c.dsp.sample_rate == 16000);
  CHECK(c.dsp.n_fft == 512);
  CHECK(c.dsp.hop == 160);
  CHECK(c.dsp.n_mels == 64);
  CHECK(c.dsp.fmax == 8000.0);
  CHECK(c.augment.freq_mask_width == 12);
  CHECK(c.augment.time_mask_width == 30);
  CHECK(c.model.in_frames == 300);
  CHECK(c.model.branch_channels == std::vector<std::size_t>{16, 32, 64});
  CHECK(c.model == desk_model_config(64, 300, 8));
  CHECK(c.train.lr == 0.001);
  CHECK(c.train.weight_decay == 0.0001);
  CHECK(c.train.eps_adam == 1e-8);
  CHECK(c.data.n_frames_target == 300);
  CHECK(c.data.schema == "ravdess");
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK(rejects(R"({"trian": {}})"));
  CHECK(rejects(R"({"train": {"learning_rate": 0.1}})"));
  CHECK(rejects(R"({"dsp": {"n_fft": -4}})"));
  CHECK(rejects(R"({"dsp": {"n_fft": "big"}})"));
  CHECK(rejects(R"({"augment": {"enabled": 1}})"));
  CHECK(rejects(R"({"model": {"branch_channels": [16, "x"]}})"));
  CHECK(rejects(R"({"train": 3})"));
  CHECK(rejects("{not json"));
}

TEST_CASE("cross-section checks") {
  CHECK(rejects(R"({"dsp": {"n_mels": 40}})"));
  CHECK(rejects(R"({"data": {"n_frames_target": 200}})"));
  CHECK(rejects(R"({"data": {"schema": "emovo"}})"));
  CHECK(rejects(R"({"augment": {"freq_mask_width": 65}})"));
  CHECK_FALSE(rejects(R"({"data": {"schema": "emovo"}, "model": {"n_classes": 7}})"));
  CHECK_FALSE(rejects(R"({"data": {"merge_calm": true}, "model": {"n_classes": 7}})"));
  CHECK(rejects(R"({"data": {"merge_calm": true}})"));
}

TEST_CASE("overrides") {
  EngineConfig c;
  apply_override(c, "train.lr=0.01");
  CHECK(c.train.lr == 0.01);
  apply_override(c, "data.manifest=/tmp/m.tsv");
  CHECK(c.data.manifest == "/tmp/m.tsv");
  apply_override(c, "augment.enabled=false");
  CHECK_FALSE(c.augment.enabled);
  apply_override(c, "train.epochs=0");
  CHECK(c.train.epochs == 0);
  CHECK_THROWS_AS(apply_override(c, "train.lrr=1"), Error);
  CHECK_THROWS_AS(apply_override(c, "bogus.lr=1"), Error);
  CHECK_THROWS_AS(apply_override(c, "train.lr"), Error);
  CHECK_THROWS_AS(apply_override(c, "dsp.n_mels=32"), Error);
}

TEST_CASE("resolved config reproduces itself") {
  EngineConfig c = testing::fixture_engine_config("/data/m.tsv", 7);
  c.train.lr = 0.003;
  c.augment.max_shift = 2;
  const std::string text = to_json(c).dump(2);
  const EngineConfig back = parse_engine_config(text);
  CHECK(back == c);
  CHECK(to_json(back).dump(2) == text);

  testing::TempDir dir("config");
  std::ofstream(dir / "c.json") << text;
  CHECK(load_engine_config(dir / "c.json") == c);
  try {
    load_engine_config(dir / "missing.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNotFound);
  }
}

TEST_CASE("config hashes") {
  const EngineConfig a = testing::fixture_engine_config("/data/m.tsv", 5);
  EngineConfig b = a;
  b.train.epochs = 50;
  b.data.manifest = "/elsewhere.tsv";
  CHECK(config_hashes(a) == config_hashes(b));
  b.train.seed = 99;
  CHECK(config_hashes(a).train != config_hashes(b).train);
  CHECK(config_hashes(a).model == config_hashes(b).model);
  EngineConfig d = a;
  d.dsp.fmin = 20.0;
  CHECK(config_hashes(a).dsp != config_hashes(d).dsp);
  CHECK(hash_hex(0xabcull) == "0000000000000abc");
  CHECK(json_hash(json::parse(R"({"b":1,"a":2})")) == json_hash(json::parse(R"({"a":2,"b":1})")));
}

}  // namespace
}  // namespace emohrnet
