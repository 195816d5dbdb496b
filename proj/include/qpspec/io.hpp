// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace qpspec {

std::string sha256_file(const std::string& path);

// Files written to "<path>.partial" and renamed on commit; uncommitted
// files are removed on destruction.
class OutputSet {
 public:
  explicit OutputSet(std::string dir);
  ~OutputSet();
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  // Staging path for a relative name.
  std::string stage(const std::string& name);
  void commit();
  const std::vector<std::string>& names() const { return names_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
  bool committed_ = false;
};

void write_text(const std::string& path, const std::string& text);

}  // namespace qpspec
