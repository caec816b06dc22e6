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

#include "error.h"

namespace emohrnet {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kCorruptData: return "corrupt data";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kChecksumMismatch: return "checksum mismatch";
    case ErrorKind::kConfigMismatch: return "config mismatch";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kCheckFailed: return "check failed";
  }
  return "unknown";
}

}  // namespace emohrnet
