#include "twostream/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "twostream/tensor_io.hpp"

namespace twostream {

const Tensor& Checkpoint::at(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("checkpoint has no meta key '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string payload;
  std::ostringstream manifest;
  manifest << "CKPT1 " << ckpt.meta.size() << ' ' << ckpt.tensors.size() << '\n';
  for (const auto& [key, value] : ckpt.meta) manifest << "meta " << key << ' ' << value << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    std::ostringstream rec;
    write_tsr(rec, t);
    const std::string bytes = rec.str();
    manifest << "tensor " << name << ' ' << payload.size() << ' ' << bytes.size() << '\n';
    payload += bytes;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  const std::string head = manifest.str();
  os.write(head.data(), std::streamsize(head.size()));
  os.write(payload.data(), std::streamsize(payload.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::istringstream head(line);
  std::string magic;
  std::size_t n_meta = 0, n_tensors = 0;
  if (!(head >> magic >> n_meta >> n_tensors) || magic != "CKPT1") {
    throw FormatError("not a CKPT1 file: " + path.string());
  }
  Checkpoint ckpt;
  for (std::size_t i = 0; i < n_meta; ++i) {
    if (!std::getline(is, line) || line.rfind("meta ", 0) != 0) throw FormatError("CKPT1: bad meta line");
    const auto sep = line.find(' ', 5);
    if (sep == std::string::npos) throw FormatError("CKPT1: bad meta line '" + line + "'");
    ckpt.meta[line.substr(5, sep - 5)] = line.substr(sep + 1);
  }
  struct Entry {
    std::string name;
    std::size_t offset, length;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::getline(is, line);
    std::istringstream ls(line);
    std::string tag;
    Entry e;
    if (!(ls >> tag >> e.name >> e.offset >> e.length) || tag != "tensor") {
      throw FormatError("CKPT1: bad tensor line '" + line + "'");
    }
    entries.push_back(std::move(e));
  }
  const std::string payload{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  for (const auto& e : entries) {
    if (e.offset + e.length > payload.size()) throw FormatError("CKPT1: entry '" + e.name + "' out of range");
    std::istringstream rec(payload.substr(e.offset, e.length));
    ckpt.add(e.name, read_tsr(rec));
  }
  return ckpt;
}

}  // namespace twostream
