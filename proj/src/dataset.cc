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

#include "dataset.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "error.h"
#include "rng.h"

namespace emohrnet {
namespace {

constexpr uint64_t kShuffleStream = 0x73687566666c65ull;  // "shuffle"
constexpr uint64_t kSplitStream = 0x73706c6974ull;        // "split"

std::string basename_of(std::string_view name) {
  const std::size_t slash = name.find_last_of("/\\");
  return std::string(slash == std::string_view::npos ? name : name.substr(slash + 1));
}

std::string strip_wav(std::string_view name) {
  std::string base = basename_of(name);
  if (base.size() > 4) {
    std::string ext = base.substr(base.size() - 4);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") base.resize(base.size() - 4);
  }
  return base;
}

std::vector<std::string> split_on(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename Fn>
void shuffle_with(std::vector<Fn>& items, Rng& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::swap(items[i], items[rng.uniform_int(0, i)]);
  }
}

}  // namespace

LabelSchema schema_by_name(std::string_view name) {
  if (name == "ravdess") {
    return {"ravdess",
            {"neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"}};
  }
  if (name == "ravdess7") {
    return {"ravdess7",
            {"neutral", "happy", "sad", "angry", "fearful", "disgust", "surprised"}};
  }
  if (name == "iemocap") {
    return {"iemocap", {"happiness", "anger", "sadness", "frustration", "neutral"}};
  }
  if (name == "emovo") {
    return {"emovo",
            {"disgust", "fear", "anger", "joy", "surprise", "sadness", "neutral"}};
  }
  fail(ErrorKind::kInvalidArgument, "unknown label schema: " + std::string(name));
}

RavdessInfo parse_ravdess_filename(std::string_view name, bool merge_calm) {
  const std::string stem = strip_wav(name);
  const std::vector<std::string> fields = split_on(stem, '-');
  auto malformed = [&](const std::string& why) {
    fail(ErrorKind::kInvalidArgument,
         "malformed RAVDESS filename '" + std::string(name) + "': " + why);
  };
  if (fields.size() != 7) malformed("expected 7 hyphen-separated fields");
  std::array<int, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) {
    const std::string& f = fields[i];
    if (f.size() != 2 || !std::isdigit(static_cast<unsigned char>(f[0])) ||
        !std::isdigit(static_cast<unsigned char>(f[1]))) {
      malformed("field " + std::to_string(i + 1) + " is not a two-digit code");
    }
    v[i] = std::stoi(f);
  }
  if (v[2] < 1 || v[2] > 8) malformed("emotion code out of range 01-08");
  if (v[6] < 1) malformed("actor id must be positive");
  RavdessInfo info;
  info.modality = v[0];
  info.vocal_channel = v[1];
  info.emotion = v[2];
  info.intensity = v[3];
  info.statement = v[4];
  info.repetition = v[5];
  info.actor = v[6];
  info.class_id = static_cast<std::size_t>(v[2] - 1);
  if (merge_calm && info.class_id >= 1) info.class_id -= 1;
  return info;
}

EmovoInfo parse_emovo_filename(std::string_view name) {
  static const std::map<std::string, std::size_t> kCodes = {
      {"dis", 0}, {"pau", 1}, {"rab", 2}, {"gio", 3},
      {"sor", 4}, {"tri", 5}, {"neu", 6},
  };
  const std::string stem = strip_wav(name);
  const std::vector<std::string> fields = split_on(stem, '-');
  if (fields.size() != 3) {
    fail(ErrorKind::kInvalidArgument,
         "malformed EMOVO filename '" + std::string(name) + "': expected 3 fields");
  }
  std::string code = fields[0];
  std::transform(code.begin(), code.end(), code.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  const auto it = kCodes.find(code);
  if (it == kCodes.end()) {
    fail(ErrorKind::kInvalidArgument,
         "unknown EMOVO emotion code '" + fields[0] + "' in " + std::string(name));
  }
  return {it->second, fields[1]};
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  fail(ErrorKind::kInvalidArgument, "unknown split tag: " + std::string(name));
}

std::vector<ManifestRow> Manifest::split_rows(Split split) const {
  std::vector<ManifestRow> out;
  for (const ManifestRow& row : rows) {
    if (row.split == split) out.push_back(row);
  }
  return out;
}

void Manifest::validate() const {
  std::optional<std::size_t> classes;
  if (!schema.empty()) classes = schema_by_name(schema).size();
  std::set<std::string> seen;
  for (const ManifestRow& row : rows) {
    if (!seen.insert(row.path).second) {
      fail(ErrorKind::kInvalidArgument, "duplicate manifest path: " + row.path);
    }
    if (classes && row.class_id >= *classes) {
      fail(ErrorKind::kInvalidArgument,
           "class id " + std::to_string(row.class_id) + " out of range for schema " +
               schema + " (" + row.path + ")");
    }
  }
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream out;
  out << "# path\tclass_id\tsplit\tsource_id\n";
  if (!manifest.schema.empty()) out << "# schema: " << manifest.schema << '\n';
  for (const ManifestRow& row : manifest.rows) {
    out << row.path << '\t' << row.class_id << '\t' << split_name(row.split) << '\t'
        << row.source_id << '\n';
  }
  return out.str();
}

Manifest parse_manifest(std::string_view text) {
  Manifest manifest;
  std::size_t line_no = 0;
  for (const std::string& raw : split_on(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view kSchema = "# schema:";
      if (line.rfind(kSchema, 0) == 0) {
        std::string name = line.substr(kSchema.size());
        name.erase(0, name.find_first_not_of(' '));
        manifest.schema = name;
      }
      continue;
    }
    const std::vector<std::string> cols = split_on(line, '\t');
    if (cols.size() != 4) {
      fail(ErrorKind::kCorruptData,
           "manifest line " + std::to_string(line_no) + ": expected 4 columns");
    }
    ManifestRow row;
    row.path = cols[0];
    try {
      std::size_t used = 0;
      row.class_id = std::stoul(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::kCorruptData,
           "manifest line " + std::to_string(line_no) + ": bad class id '" + cols[1] + "'");
    }
    row.split = parse_split(cols[2]);
    row.source_id = cols[3];
    manifest.rows.push_back(std::move(row));
  }
  manifest.validate();
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kNotFound, "cannot write manifest: " + path.string());
  out << format_manifest(manifest);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kNotFound, "cannot open manifest: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  Manifest manifest = parse_manifest(text.str());
  const std::filesystem::path base = path.parent_path();
  for (ManifestRow& row : manifest.rows) {
    const std::filesystem::path p(row.path);
    if (p.is_relative() && !base.empty()) row.path = (base / p).string();
  }
  return manifest;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitPolicy& policy) {
  const std::array<double, 3> weights = {policy.train, policy.val, policy.test};
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0, "split fractions must be non-negative");
    total += w;
  }
  require(total > 0.0, "split fractions must not all be zero");
  constexpr double kTol = 1e-9;
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * weights[i] / total;
    const double whole = std::floor(quota + kTol);
    sizes[i] = static_cast<std::size_t>(whole);
    remainder[i] = std::max(0.0, quota - whole);
    assigned += sizes[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainder[i] >= remainder[best] - kTol) best = i;
    }
    ++sizes[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

ManifestBuild build_manifest(const std::filesystem::path& root,
                             std::string_view schema_name, const SplitPolicy& policy,
                             uint64_t seed, const ScanOptions& options) {
  const LabelSchema schema = schema_by_name(schema_name);
  if (schema.corpus == "iemocap") {
    fail(ErrorKind::kUnsupported,
         "IEMOCAP labels are only accepted through a pre-labeled manifest");
  }
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) {
    fail(ErrorKind::kNotFound, "corpus directory not found: " + root.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    fail(ErrorKind::kInvalidArgument, "no WAV files under " + root.string());
  }

  ManifestBuild build;
  build.manifest.schema = schema.corpus;
  std::vector<std::string> speakers;
  for (const auto& file : files) {
    const std::string name = file.filename().string();
    ManifestRow row;
    row.path = file.string();
    row.source_id = strip_wav(name);
    std::string speaker;
    try {
      if (schema.corpus == "emovo") {
        const EmovoInfo info = parse_emovo_filename(name);
        row.class_id = info.class_id;
        speaker = info.speaker;
      } else {
        const RavdessInfo info =
            parse_ravdess_filename(name, schema.corpus == "ravdess7");
        if (!options.include_song && info.vocal_channel == 2) continue;
        row.class_id = info.class_id;
        speaker = "actor" + std::to_string(info.actor);
      }
    } catch (const Error& e) {
      ++build.skipped;
      build.warnings.push_back(e.what());
      continue;
    }
    build.manifest.rows.push_back(std::move(row));
    speakers.push_back(std::move(speaker));
  }
  const std::size_t n = build.manifest.rows.size();
  if (n == 0) {
    fail(ErrorKind::kInvalidArgument, "no parseable WAV files under " + root.string());
  }

  Rng rng(seed, kSplitStream);
  std::set<std::string> distinct(speakers.begin(), speakers.end());
  if (policy.speaker_disjoint && distinct.size() >= 3) {
    std::vector<std::string> order(distinct.begin(), distinct.end());
    shuffle_with(order, rng);
    const std::array<std::size_t, 3> counts = split_sizes(order.size(), policy);
    std::map<std::string, Split> assignment;
    std::size_t k = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < counts[s]; ++i) {
        assignment[order[k++]] = static_cast<Split>(s);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      build.manifest.rows[i].split = assignment.at(speakers[i]);
    }
  } else {
    if (policy.speaker_disjoint) {
      build.warnings.push_back("fewer than 3 speakers; speaker-disjoint split disabled");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_with(order, rng);
    const std::array<std::size_t, 3> counts = split_sizes(n, policy);
    std::size_t k = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < counts[s]; ++i) {
        build.manifest.rows[order[k++]].split = static_cast<Split>(s);
      }
    }
  }

  std::vector<std::size_t> per_class(schema.size(), 0);
  for (const ManifestRow& row : build.manifest.rows) ++per_class[row.class_id];
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (per_class[c] == 0) {
      build.warnings.push_back("class '" + schema.labels[c] + "' has no samples");
    }
  }
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    if (build.manifest.split_rows(s).empty()) {
      build.warnings.push_back("split '" + std::string(split_name(s)) + "' is empty");
    }
  }
  return build;
}

std::vector<Example> load_examples(const Manifest& manifest, Split split,
                                   const DspConfig& dsp, std::size_t n_frames_target) {
  std::vector<Example> out;
  for (const ManifestRow& row : manifest.rows) {
    if (row.split != split) continue;
    MelSpectrogram mel;
    try {
      mel = mel_spectrogram(load_wav(row.path), dsp, row.source_id);
    } catch (const Error& e) {
      fail(e.kind(), "failed to load " + row.path + ": " + e.what());
    }
    out.push_back({row.source_id, fit_frames(mel.values, n_frames_target), row.class_id});
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, uint64_t epoch,
                                     bool shuffle) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng(seed, mix_stream(kShuffleStream, epoch));
    shuffle_with(order, rng);
  }
  return order;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t n_classes) {
  Tensor out({labels.size(), n_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < n_classes,
            "label " + std::to_string(labels[i]) + " out of range for " +
                std::to_string(n_classes) + " classes");
    out[i * n_classes + labels[i]] = 1.0;
  }
  return out;
}

Batch make_batch(std::span<const Example> examples,
                 std::span<const std::size_t> indices, std::size_t n_classes) {
  require(!indices.empty(), "empty batch");
  const Matrix& first = examples[indices[0]].features;
  Batch batch;
  batch.input = Tensor({indices.size(), 1, first.rows, first.cols});
  std::vector<std::size_t> labels;
  const std::size_t plane = first.rows * first.cols;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Example& ex = examples[indices[i]];
    require(ex.features.rows == first.rows && ex.features.cols == first.cols,
            "inconsistent spectrogram sizes within a batch");
    std::copy(ex.features.data.begin(), ex.features.data.end(),
              batch.input.data().begin() + static_cast<std::ptrdiff_t>(i * plane));
    labels.push_back(ex.label);
    batch.ids.push_back(ex.id);
  }
  batch.labels = one_hot(labels, n_classes);
  return batch;
}

std::vector<Batch> batch_iter(std::span<const Example> examples, std::size_t batch_size,
                              uint64_t seed, uint64_t epoch, bool shuffle,
                              std::size_t n_classes) {
  require(batch_size >= 1, "batch_size must be at least 1");
  const std::vector<std::size_t> order = epoch_order(examples.size(), seed, epoch, shuffle);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    out.push_back(make_batch(examples, std::span(order).subspan(start, len), n_classes));
  }
  return out;
}

std::vector<Batch> batch_iter(const Manifest& manifest, Split split,
                              const DspConfig& dsp, std::size_t n_frames_target,
                              std::size_t batch_size, uint64_t seed, uint64_t epoch,
                              bool shuffle) {
  require(!manifest.schema.empty(), "manifest has no schema reference");
  const std::vector<Example> examples = load_examples(manifest, split, dsp, n_frames_target);
  return batch_iter(examples, batch_size, seed, epoch, shuffle,
                    schema_by_name(manifest.schema).size());
}

}  // namespace emohrnet
