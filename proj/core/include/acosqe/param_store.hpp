#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "acosqe/rng.hpp"
#include "acosqe/tensor.hpp"

namespace acosqe {

// Named parameter tensors plus a parallel gradient map.  Value buffers are
// shared: every tape references the same storage through leaf tensors, so a
// store can serve many concurrent forward passes (reads) while updates stay
// on one thread.
class ParamStore {
 public:
  Tensor create(const std::string& name, std::vector<int> shape);
  Tensor create_uniform(const std::string& name, std::vector<int> shape, Rng& rng,
                        double scale);
  // fan-in scaled uniform (+-1/sqrt(fan_in)); fan_in = last dimension
  Tensor create_fan_in(const std::string& name, std::vector<int> shape, Rng& rng);
  Tensor create_normal(const std::string& name, std::vector<int> shape, Rng& rng,
                       double stddev);
  void put(const std::string& name, std::vector<int> shape, std::vector<double> data);

  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;  // sorted
  const std::vector<int>& shape(const std::string& name) const;
  std::shared_ptr<std::vector<double>> storage(const std::string& name) const;
  std::vector<double>& values(const std::string& name);
  const std::vector<double>& values(const std::string& name) const;

  std::vector<double>& grad(const std::string& name);
  void zero_grads();
  void accumulate_grad(const std::string& name, const std::vector<double>& g);

  int64_t total_parameters() const;

  // snapshot / restore of all values (used for best-checkpoint bookkeeping)
  std::map<std::string, std::vector<double>> snapshot() const;
  void restore(const std::map<std::string, std::vector<double>>& snap);

 private:
  struct Entry {
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    std::vector<double> grad;
  };
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);
  std::map<std::string, Entry> entries_;
};

// Per-tape instantiation of store parameters.  Each forward pass gets its
// own leaves (sharing value storage with the store but owning gradient
// buffers), which keeps concurrent backward passes race-free; gradients are
// merged into the store afterwards in a deterministic order.
class ParamLeaves {
 public:
  explicit ParamLeaves(const ParamStore& store) : store_(&store) {}
  Tensor get(const std::string& name);
  // Add every touched leaf's gradient into the store's gradient map.
  void accumulate_into(ParamStore& store) const;

 private:
  const ParamStore* store_;
  std::map<std::string, Tensor> leaves_;
};

// Checkpoint container: magic "ACOS1\n", little-endian u64 manifest length,
// UTF-8 JSON manifest (name/shape/dtype/offset per tensor), then raw
// little-endian f64 payloads.  Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParamStore& store);
void load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace acosqe
