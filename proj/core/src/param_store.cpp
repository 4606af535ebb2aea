#include "acosqe/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "acosqe/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace acosqe {

namespace {
int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}
}  // namespace

Tensor ParamStore::create(const std::string& name, std::vector<int> shape) {
  if (entries_.count(name)) throw NumericError("parameter '" + name + "' already exists");
  Entry e;
  e.data = std::make_shared<std::vector<double>>(
      static_cast<size_t>(numel_of(shape)), 0.0);
  e.shape = std::move(shape);
  entries_[name] = std::move(e);
  return Tensor::leaf_shared(entries_[name].shape, entries_[name].data);
}

Tensor ParamStore::create_uniform(const std::string& name, std::vector<int> shape,
                                  Rng& rng, double scale) {
  Tensor t = create(name, std::move(shape));
  auto& v = *entries_[name].data;
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return t;
}

Tensor ParamStore::create_fan_in(const std::string& name, std::vector<int> shape,
                                 Rng& rng) {
  double fan_in = static_cast<double>(shape.back());
  return create_uniform(name, std::move(shape), rng, 1.0 / std::sqrt(fan_in));
}

Tensor ParamStore::create_normal(const std::string& name, std::vector<int> shape,
                                 Rng& rng, double stddev) {
  Tensor t = create(name, std::move(shape));
  auto& v = *entries_[name].data;
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return t;
}

void ParamStore::put(const std::string& name, std::vector<int> shape,
                     std::vector<double> data) {
  if (numel_of(shape) != static_cast<int64_t>(data.size()))
    throw ShapeMismatchError("put: data does not match shape for '" + name + "'");
  Entry e;
  e.shape = std::move(shape);
  e.data = std::make_shared<std::vector<double>>(std::move(data));
  entries_[name] = std::move(e);
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw NumericError("unknown parameter '" + name + "'");
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw NumericError("unknown parameter '" + name + "'");
  return it->second;
}

const std::vector<int>& ParamStore::shape(const std::string& name) const {
  return entry(name).shape;
}

std::shared_ptr<std::vector<double>> ParamStore::storage(const std::string& name) const {
  return entry(name).data;
}

std::vector<double>& ParamStore::values(const std::string& name) {
  return *entry(name).data;
}

const std::vector<double>& ParamStore::values(const std::string& name) const {
  return *entry(name).data;
}

std::vector<double>& ParamStore::grad(const std::string& name) {
  Entry& e = entry(name);
  if (e.grad.size() != e.data->size()) e.grad.assign(e.data->size(), 0.0);
  return e.grad;
}

void ParamStore::zero_grads() {
  for (auto& [k, e] : entries_) e.grad.assign(e.data->size(), 0.0);
}

void ParamStore::accumulate_grad(const std::string& name,
                                 const std::vector<double>& g) {
  auto& dst = grad(name);
  if (dst.size() != g.size())
    throw ShapeMismatchError("accumulate_grad: size mismatch for '" + name + "'");
  for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

int64_t ParamStore::total_parameters() const {
  int64_t n = 0;
  for (const auto& [k, e] : entries_) n += static_cast<int64_t>(e.data->size());
  return n;
}

std::map<std::string, std::vector<double>> ParamStore::snapshot() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [k, e] : entries_) out[k] = *e.data;
  return out;
}

void ParamStore::restore(const std::map<std::string, std::vector<double>>& snap) {
  for (const auto& [k, v] : snap) {
    Entry& e = entry(k);
    if (e.data->size() != v.size())
      throw ShapeMismatchError("restore: size mismatch for '" + k + "'");
    *e.data = v;
  }
}

// ---------------------------------------------------------------------------

Tensor ParamLeaves::get(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  Tensor leaf = Tensor::leaf_shared(store_->shape(name), store_->storage(name));
  leaves_[name] = leaf;
  return leaf;
}

void ParamLeaves::accumulate_into(ParamStore& store) const {
  for (const auto& [name, leaf] : leaves_) {
    if (leaf.node()->grad.empty()) continue;
    store.accumulate_grad(name, leaf.node()->grad);
  }
}

// ---------------------------------------------------------------------------
// checkpoint I/O

static constexpr char kMagic[] = "ACOS1\n";

void save_checkpoint(const std::string& path, const ParamStore& store) {
  nlohmann::json manifest = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& name : store.names()) {
    const auto& shape = store.shape(name);
    const auto& vals = store.values(name);
    nlohmann::json rec;
    rec["name"] = name;
    rec["shape"] = shape;
    rec["dtype"] = "f64";
    rec["offset"] = offset;
    manifest.push_back(rec);
    offset += vals.size() * sizeof(double);
  }
  std::string mtext = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 6);
  uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& name : store.names()) {
    const auto& vals = store.values(name);
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
  }
  if (!out) throw DataError("short write on checkpoint '" + path + "'");
}

void load_checkpoint(const std::string& path, ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint '" + path + "'");
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!in || mlen > (1ull << 32)) throw DataError("corrupt checkpoint manifest length");
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw DataError("truncated checkpoint manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  std::streampos payload_base = in.tellg();
  for (const auto& rec : manifest) {
    std::string name = rec.at("name").get<std::string>();
    std::vector<int> shape = rec.at("shape").get<std::vector<int>>();
    std::string dtype = rec.at("dtype").get<std::string>();
    if (dtype != "f64") throw DataError("unsupported dtype '" + dtype + "'");
    uint64_t offset = rec.at("offset").get<uint64_t>();
    std::vector<double> vals(static_cast<size_t>(numel_of(shape)));
    in.seekg(payload_base + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint payload for '" + name + "'");
    store.put(name, std::move(shape), std::move(vals));
  }
}

}  // namespace acosqe
