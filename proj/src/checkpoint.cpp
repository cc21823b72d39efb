#include "pathcaps/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pathcaps/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace pathcaps {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'A', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_u64(std::ofstream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_entry(std::ofstream& out, const std::string& name, const Tensor& t) {
  put_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, t.rank());
  for (size_t i = 0; i < t.rank(); ++i) put_u64(out, static_cast<uint64_t>(t.dim(i)));
  out.write(reinterpret_cast<const char*>(t.values().data()),
            static_cast<std::streamsize>(t.values().size() * sizeof(double)));
}

struct Reader {
  std::vector<uint8_t> bytes;
  size_t pos = 0;
  std::string path;

  void need(size_t n, const std::string& what) {
    if (pos + n > bytes.size())
      throw FormatError("'" + path + "': truncated while reading " + what);
  }
  uint32_t u32(const std::string& what) {
    need(4, what);
    uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64(const std::string& what) {
    need(8, what);
    uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str(size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

Tensor read_entry(Reader& r, std::string& name_out) {
  uint64_t name_len = r.u64("entry name length");
  if (name_len > 4096) throw FormatError("'" + r.path + "': entry name length " +
                                         std::to_string(name_len) + " is implausible");
  std::string name = r.str(name_len, "entry name");
  uint64_t rank = r.u64("rank of '" + name + "'");
  if (rank > 8)
    throw FormatError("'" + r.path + "': entry '" + name + "': rank " + std::to_string(rank) +
                      " is implausible");
  Shape shape(rank);
  uint64_t numel = 1;
  for (uint64_t i = 0; i < rank; ++i) {
    uint64_t e = r.u64("extent of '" + name + "'");
    if (e > (1ull << 32))
      throw FormatError("'" + r.path + "': entry '" + name + "': extent " + std::to_string(e) +
                        " is implausible");
    shape[i] = static_cast<int64_t>(e);
    numel *= e;
  }
  if (r.pos + numel * sizeof(double) > r.bytes.size())
    throw FormatError("'" + r.path + "': entry '" + name + "': data truncated (" +
                      std::to_string(numel) + " values declared)");
  std::vector<double> values(numel);
  std::memcpy(values.data(), r.bytes.data() + r.pos, numel * sizeof(double));
  r.pos += numel * sizeof(double);
  name_out = std::move(name);
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json meta;
  meta["spec"] = spec_to_json(ckpt.spec);
  meta["adam"] = {{"lr", ckpt.adam_config.lr},
                  {"beta1", ckpt.adam_config.beta1},
                  {"beta2", ckpt.adam_config.beta2},
                  {"eps", ckpt.adam_config.eps},
                  {"t", ckpt.adam_t},
                  {"present", ckpt.has_adam}};
  meta["rng"] = ckpt.rng_state;
  meta["epoch"] = ckpt.epoch;
  meta["val_error_pct"] = ckpt.val_error_pct;
  std::string header = meta.dump();  // nlohmann orders keys canonically

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  uint64_t entries = ckpt.params.size();
  if (ckpt.has_adam) entries += ckpt.adam_m.size() + ckpt.adam_v.size();
  put_u64(out, entries);
  for (const auto& name : ckpt.params.names()) write_entry(out, name, ckpt.params.at(name));
  if (ckpt.has_adam) {
    for (const auto& name : ckpt.adam_m.names())
      write_entry(out, "adam.m." + name, ckpt.adam_m.at(name));
    for (const auto& name : ckpt.adam_v.names())
      write_entry(out, "adam.v." + name, ckpt.adam_v.at(name));
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    r.bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  std::string magic = r.str(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError("'" + path + "': magic '" + magic + "' is not PCAP");
  uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError("'" + path + "': unsupported format version " + std::to_string(version));

  uint64_t header_len = r.u64("header length");
  std::string header = r.str(header_len, "header");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': header is not valid JSON: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.spec = spec_from_json(meta.at("spec"));
    const auto& adam = meta.at("adam");
    ckpt.adam_config.lr = adam.at("lr").get<double>();
    ckpt.adam_config.beta1 = adam.at("beta1").get<double>();
    ckpt.adam_config.beta2 = adam.at("beta2").get<double>();
    ckpt.adam_config.eps = adam.at("eps").get<double>();
    ckpt.adam_t = adam.at("t").get<int64_t>();
    ckpt.has_adam = adam.at("present").get<bool>();
    ckpt.rng_state = meta.at("rng").get<std::string>();
    ckpt.epoch = meta.at("epoch").get<int>();
    ckpt.val_error_pct = meta.at("val_error_pct").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': header field missing or mistyped: " + e.what());
  }

  uint64_t entries = r.u64("entry count");
  for (uint64_t i = 0; i < entries; ++i) {
    std::string name;
    Tensor t = read_entry(r, name);
    if (name.rfind("adam.m.", 0) == 0)
      ckpt.adam_m.add(name.substr(7), std::move(t));
    else if (name.rfind("adam.v.", 0) == 0)
      ckpt.adam_v.add(name.substr(7), std::move(t));
    else
      ckpt.params.add(name, std::move(t));
  }
  if (r.pos != r.bytes.size())
    throw FormatError("'" + path + "': " + std::to_string(r.bytes.size() - r.pos) +
                      " trailing bytes after the last entry");
  return ckpt;
}

}  // namespace pathcaps
