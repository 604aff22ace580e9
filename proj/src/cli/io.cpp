#include "rlbd/cli/io.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "rlbd/error.hpp"

namespace rlbd::cli {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

OutputBundle::OutputBundle(std::filesystem::path dir, std::string command)
    : dir_(std::move(dir)), command_(std::move(command)) {}

void OutputBundle::add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

std::string OutputBundle::manifest() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, content] : files_) {
    files.push_back({{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }
  return nlohmann::json{{"command", command_}, {"files", files}}.dump(1) + "\n";
}

void OutputBundle::commit() const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output_dir " + dir_.string() + ": " + ec.message());
  const auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
  };
  for (const auto& [name, content] : files_) write(name, content);
  write("manifest.json", manifest());
}

}  // namespace rlbd::cli
