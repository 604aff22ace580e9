#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rlbd::cli {

std::string sha256_hex(std::string_view data);

// Throws ArtifactError when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

// Files produced by one command. Nothing touches disk until commit(), which
// writes every file plus manifest.json listing each file's SHA-256.
class OutputBundle {
 public:
  OutputBundle(std::filesystem::path dir, std::string command);

  void add(std::string name, std::string content);
  const std::vector<std::pair<std::string, std::string>>& files() const noexcept { return files_; }

  std::string manifest() const;
  void commit() const;

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace rlbd::cli
