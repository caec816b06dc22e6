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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audio.h"
#include "checkpoint.h"
#include "config.h"
#include "dataset.h"
#include "emohrnet/emohrnet.h"
#include "test_util.h"

namespace emohrnet {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct ConfigHandle {
  emohrnet_config* ptr = nullptr;
  ~ConfigHandle() { emohrnet_config_free(ptr); }
};

struct CheckpointHandle {
  emohrnet_checkpoint* ptr = nullptr;
  ~CheckpointHandle() { emohrnet_checkpoint_free(ptr); }
};

std::string take(char* s) {
  std::string out = s != nullptr ? s : "";
  emohrnet_string_free(s);
  return out;
}

std::string json_text(const EngineConfig& cfg) { return to_json(cfg).dump(); }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(EMOHRNET_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

TEST_CASE("status names and exit codes") {
  CHECK(std::string(emohrnet_version()).size() > 0);
  CHECK(emohrnet_exit_code(EMOHRNET_OK) == 0);
  CHECK(emohrnet_exit_code(EMOHRNET_ERR_CHECK_FAILED) == 1);
  for (emohrnet_status s :
       {EMOHRNET_ERR_INVALID_ARGUMENT, EMOHRNET_ERR_NOT_FOUND, EMOHRNET_ERR_UNSUPPORTED,
        EMOHRNET_ERR_CORRUPT_DATA, EMOHRNET_ERR_TRUNCATED, EMOHRNET_ERR_CHECKSUM_MISMATCH,
        EMOHRNET_ERR_CONFIG_MISMATCH}) {
    CHECK(emohrnet_exit_code(s) == 2);
  }
  CHECK(emohrnet_exit_code(EMOHRNET_ERR_NUMERICAL) == 3);
  CHECK(std::string(emohrnet_status_name(EMOHRNET_ERR_NOT_FOUND)) == "not found");
}

TEST_CASE("config through the C API") {
  ConfigHandle cfg;
  REQUIRE(emohrnet_config_default(&cfg.ptr) == EMOHRNET_OK);
  CHECK(emohrnet_config_set(cfg.ptr, "train.lr=0.0005") == EMOHRNET_OK);
  char* text = nullptr;
  REQUIRE(emohrnet_config_to_json(cfg.ptr, &text) == EMOHRNET_OK);
  const EngineConfig parsed = parse_engine_config(take(text));
  CHECK(parsed.train.lr == 0.0005);
  EngineConfig expect;
  expect.train.lr = 0.0005;
  CHECK(parsed == expect);

  CHECK(emohrnet_config_set(cfg.ptr, "train.nope=1") == EMOHRNET_ERR_INVALID_ARGUMENT);
  CHECK(std::string(emohrnet_last_error()).find("nope") != std::string::npos);
  CHECK(emohrnet_config_set(cfg.ptr, "train.lr") == EMOHRNET_ERR_INVALID_ARGUMENT);

  ConfigHandle bad;
  CHECK(emohrnet_config_parse("{not json", &bad.ptr) == EMOHRNET_ERR_INVALID_ARGUMENT);
  CHECK(bad.ptr == nullptr);
  CHECK(emohrnet_config_load("/nonexistent/config.json", &bad.ptr) ==
        EMOHRNET_ERR_NOT_FOUND);
  CHECK(emohrnet_config_parse(nullptr, &bad.ptr) == EMOHRNET_ERR_INVALID_ARGUMENT);
}

TEST_CASE("commands and checkpoints through the C API") {
  TempDir dir("capi");
  const fs::path manifest = testing::write_fixture_corpus(dir.path(), true);
  const EngineConfig engine = testing::fixture_engine_config(manifest, 2);
  ConfigHandle cfg;
  REQUIRE(emohrnet_config_parse(json_text(engine).c_str(), &cfg.ptr) == EMOHRNET_OK);
  CHECK(emohrnet_config_validate(cfg.ptr) == EMOHRNET_OK);

  char* summary = nullptr;
  REQUIRE(emohrnet_preprocess(cfg.ptr, (dir / "cache").c_str(), &summary) == EMOHRNET_OK);
  CHECK(take(summary).find("16") != std::string::npos);

  CHECK(emohrnet_augment_preview(cfg.ptr, (dir / "audio" / "clip0.wav").c_str(), 1,
                                 (dir / "pv").c_str()) == EMOHRNET_OK);
  CHECK(fs::exists(dir / "pv" / "difference.pgm"));
  CHECK(emohrnet_augment_preview(cfg.ptr, (dir / "audio" / "none.wav").c_str(), 1,
                                 (dir / "pv").c_str()) == EMOHRNET_ERR_NOT_FOUND);

  std::vector<double> losses;
  auto on_epoch = [](void* user, uint64_t, double loss, int has_val, double) {
    CHECK(has_val == 1);
    static_cast<std::vector<double>*>(user)->push_back(loss);
  };
  REQUIRE(emohrnet_train(cfg.ptr, (dir / "run").c_str(), nullptr, on_epoch, &losses) ==
          EMOHRNET_OK);
  CHECK(losses.size() == 2);

  CheckpointHandle ckpt;
  REQUIRE(emohrnet_checkpoint_load((dir / "run" / "last.ckpt").c_str(), &ckpt.ptr) ==
          EMOHRNET_OK);
  CHECK(emohrnet_checkpoint_epoch(ckpt.ptr) == 2);
  double metric = -1.0;
  CHECK(emohrnet_checkpoint_metric(ckpt.ptr, &metric) == 1);
  CHECK(metric >= 0.0);
  CHECK(emohrnet_checkpoint_param_count(ckpt.ptr) ==
        load_checkpoint(dir / "run" / "last.ckpt").model.param_count());
  ConfigHandle stored;
  REQUIRE(emohrnet_checkpoint_config(ckpt.ptr, &stored.ptr) == EMOHRNET_OK);
  char* stored_json = nullptr;
  REQUIRE(emohrnet_config_to_json(stored.ptr, &stored_json) == EMOHRNET_OK);
  CHECK(parse_engine_config(take(stored_json)) == engine);

  REQUIRE(emohrnet_checkpoint_save(ckpt.ptr, (dir / "copy.ckpt").c_str()) == EMOHRNET_OK);
  CHECK(read_file_bytes(dir / "copy.ckpt") == read_file_bytes(dir / "run" / "last.ckpt"));

  std::string bytes = read_file_bytes(dir / "copy.ckpt");
  bytes[bytes.size() - 5] ^= 0x10;
  write_file_bytes(dir / "flip.ckpt", bytes);
  CheckpointHandle flipped;
  CHECK(emohrnet_checkpoint_load((dir / "flip.ckpt").c_str(), &flipped.ptr) ==
        EMOHRNET_ERR_CHECKSUM_MISMATCH);
  CHECK(flipped.ptr == nullptr);
  CHECK(std::string(emohrnet_last_error()).size() > 0);

  char* report = nullptr;
  char* table = nullptr;
  REQUIRE(emohrnet_eval(cfg.ptr, (dir / "run" / "best.ckpt").c_str(), "val", &report,
                        &table) == EMOHRNET_OK);
  const nlohmann::json j = nlohmann::json::parse(take(report));
  CHECK(j["n_samples"].get<std::size_t>() == 4);
  CHECK(take(table).find("unweighted_accuracy") != std::string::npos);
  CHECK(emohrnet_eval(cfg.ptr, (dir / "run" / "best.ckpt").c_str(), "dev", &report,
                      &table) == EMOHRNET_ERR_INVALID_ARGUMENT);
}

TEST_CASE("cli exit codes") {
  TempDir dir("cli");
  const fs::path manifest = testing::write_fixture_corpus(dir.path(), true);
  const EngineConfig engine = testing::fixture_engine_config(manifest, 1);
  std::ofstream(dir / "cfg.json") << json_text(engine);

  Manifest empty;
  empty.schema = "ravdess";
  write_manifest(dir / "empty.tsv", empty);
  const std::string cfg = "--config " + (dir / "cfg.json").string();
  CHECK(run_cli("preprocess " + cfg + " --set data.manifest=" + (dir / "empty.tsv").string() +
                    " --out " + (dir / "c0").string(),
                dir / "log") == 2);
  CHECK(run_cli("preprocess " + cfg + " --out " + (dir / "c1").string(), dir / "log") == 0);
  CHECK(run_cli("eval --out " + (dir / "e0").string() + " " + (dir / "missing.ckpt").string(),
                dir / "log") == 2);
  CHECK(read_file_bytes(dir / "log").find("missing.ckpt") != std::string::npos);
  CHECK(!fs::exists(dir / "e0"));
  CHECK(run_cli("train " + cfg + " --set train.nope=1", dir / "log") == 2);
  CHECK(run_cli("frobnicate", dir / "log") == 2);
  CHECK(run_cli("train " + cfg + " --set train.epochs=3 train.lr=1e200 --out " +
                    (dir / "nan").string(),
                dir / "log") == 3);
  CHECK(read_file_bytes(dir / "log").find("loss") != std::string::npos);

  CHECK(run_cli("train --print-params", dir / "log") == 0);
  const std::string params = read_file_bytes(dir / "log");
  CHECK(params.find("head.weight\t[8x64]\t512\n") != std::string::npos);
  CHECK(params.find("total\t\t199496\n") != std::string::npos);

  CHECK(run_cli("train " + cfg + " --out " + (dir / "run").string(), dir / "log") == 0);
  CHECK(run_cli("eval --split val --out " + (dir / "ev").string() + " " +
                    (dir / "run" / "last.ckpt").string(),
                dir / "log") == 0);
  CHECK(fs::exists(dir / "ev" / "eval-report.json"));
  CHECK(fs::exists(dir / "ev" / "confusion.txt"));

  // Three actors, all eight emotions; relative root resolved by the CLI.
  fs::create_directories(dir / "corpus");
  for (int actor = 1; actor <= 3; ++actor)
    for (int emo = 1; emo <= 8; ++emo) {
      char name[64];
      std::snprintf(name, sizeof(name), "03-01-%02d-01-01-01-%02d.wav", emo, actor);
      write_wav(dir / "corpus" / name, testing::tone({200.0 * emo}, 4000));
    }
  std::ofstream(dir / "corpus" / "notes.wav") << "junk";
  const std::string manifest_cmd = "cd " + dir.path().string() + " && " + EMOHRNET_CLI_PATH +
                                   " manifest corpus --seed 3 --out m.tsv > log 2>&1";
  REQUIRE(std::system(manifest_cmd.c_str()) == 0);
  CHECK(read_file_bytes(dir / "log").find("wrote 24 rows") != std::string::npos);
  CHECK(read_file_bytes(dir / "log").find("skipped 1") != std::string::npos);
  const Manifest built = read_manifest(dir / "m.tsv");
  CHECK(built.rows.size() == 24);
  CHECK(fs::exists(built.rows[0].path));
  CHECK(run_cli("manifest " + (dir / "nowhere").string(), dir / "log") == 2);

  CHECK(run_cli("gradcheck --mels 8 --frames 12 --corrupt-gradient 1.001", dir / "log") == 1);
  CHECK(read_file_bytes(dir / "log").find("FAILED") != std::string::npos);
  CHECK(run_cli("gradcheck", dir / "log") == 0);
  CHECK(read_file_bytes(dir / "log").find("all checks passed") != std::string::npos);
}

}  // namespace
}  // namespace emohrnet
