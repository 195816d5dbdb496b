// SPDX-License-Identifier: Apache-2.0
#include "qpspec/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "qpspec/error.hpp"

namespace qpspec {

namespace fs = std::filesystem;

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

OutputSet::OutputSet(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory '" + dir_ + "': " + ec.message());
}

OutputSet::~OutputSet() {
  if (committed_) return;
  for (const auto& n : names_) {
    std::error_code ec;
    fs::remove(fs::path(dir_) / (n + ".partial"), ec);
  }
}

std::string OutputSet::stage(const std::string& name) {
  names_.push_back(name);
  return (fs::path(dir_) / (name + ".partial")).string();
}

void OutputSet::commit() {
  for (const auto& n : names_) {
    const fs::path from = fs::path(dir_) / (n + ".partial");
    std::error_code ec;
    fs::rename(from, fs::path(dir_) / n, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot finalize '" + n + "': " + ec.message());
  }
  committed_ = true;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw Error(ErrorKind::kIo, "write failed for '" + path + "'");
}

}  // namespace qpspec
