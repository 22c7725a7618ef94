#include <bit>
#include <filesystem>
#include <fstream>

#include "qb/error.h"
#include "qb/nnet.h"

namespace qb::nnet {

static_assert(std::endian::native == std::endian::little, "tensor sidecars assume a little-endian host");

namespace {

constexpr int kTensorFormatVersion = 1;

}  // namespace

void save_tensors(const std::string& dir, const std::string& stem, const nlohmann::json& meta,
                  const std::vector<std::pair<std::string, const Matrix*>>& tensors) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["v"] = kTensorFormatVersion;
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : tensors) {
    std::string file = stem + "." + name + ".f32";
    std::ofstream out(dir + "/" + file, std::ios::binary);
    if (!out) throw Error("cannot write " + dir + "/" + file);
    auto bytes = std::as_bytes(m->values());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    manifest["tensors"].push_back({{"name", name},
                                   {"rows", m->rows()},
                                   {"cols", m->cols()},
                                   {"file", file},
                                   {"checksum", checksum(*m)}});
  }
  std::ofstream out(dir + "/" + stem + ".json");
  if (!out) throw Error("cannot write manifest for " + stem);
  out << manifest.dump(2) << '\n';
}

LoadedTensors load_tensors(const std::string& dir, const std::string& stem) {
  std::ifstream in(dir + "/" + stem + ".json");
  if (!in) throw Error("cannot read manifest " + dir + "/" + stem + ".json");
  nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.value("v", 0) != kTensorFormatVersion) throw Error("unsupported tensor manifest version");
  LoadedTensors out;
  out.meta = manifest["meta"];
  for (const auto& t : manifest["tensors"]) {
    Matrix m(t["rows"].get<std::size_t>(), t["cols"].get<std::size_t>());
    const std::string path = dir + "/" + t["file"].get<std::string>();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path);
    auto bytes = std::as_writable_bytes(m.values());
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (f.gcount() != static_cast<std::streamsize>(bytes.size())) throw Error("truncated tensor file " + path);
    if (checksum(m) != t["checksum"].get<std::uint64_t>()) throw Error("checksum mismatch in " + path);
    out.tensors.emplace(t["name"].get<std::string>(), std::move(m));
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace qb::nnet
