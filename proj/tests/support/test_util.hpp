#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ddp/core.hpp"
#include "ddp/dataset.hpp"

namespace ddp::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ddp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<VideoRecord> labeled_records(int n_deceptive, int n_truthful,
                                                const std::string& prefix = "v") {
  std::vector<VideoRecord> out;
  for (int i = 0; i < n_deceptive + n_truthful; ++i) {
    VideoRecord r;
    r.id = prefix + std::to_string(i);
    r.dataset_tag = DatasetTag::rlt;
    r.media_path = r.id + ".mp4";
    r.transcript_path = r.id + ".txt";
    r.label = i < n_deceptive ? Label::deceptive : Label::truthful;
    out.push_back(r);
  }
  return out;
}

inline double rel_err(double got, double want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-300});
  return std::abs(got - want) / scale;
}

}  // namespace ddp::testing
