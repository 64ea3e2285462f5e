// Copyright 2026 The HumorChain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HUMORCHAIN_TESTS_TEST_SUPPORT_H_
#define HUMORCHAIN_TESTS_TEST_SUPPORT_H_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "humorchain/errors.h"
#include "humorchain/types.h"

namespace humorchain::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "humorchain-XXXXXX").string();
    path_ = ::mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

inline std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline Json Script(const std::string& stage, const std::string& image,
                   int attempt, const std::string& text) {
  Json row = {{"stage", stage}, {"image_id", image}, {"response_text", text}};
  if (attempt > 0) row["attempt"] = attempt;
  return row;
}

inline std::string JudgmentText(const std::string& plausibility,
                                bool incongruity, bool living) {
  return Json{{"plausibility", plausibility},
              {"incongruity_for_humor", incongruity},
              {"has_human_or_animal_or_cartoon", living},
              {"reasons", {"first reason", "second reason"}}}
      .dump();
}

inline const std::string kCompliant =
    R"({"compliant": true, "violation_categories": [], "explanation": "safe"})";

inline std::string AssetDir() { return HUMORCHAIN_ASSET_DIR; }

}  // namespace humorchain::testing

#endif  // HUMORCHAIN_TESTS_TEST_SUPPORT_H_
