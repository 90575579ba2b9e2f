#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "activepool/random.hpp"

namespace activepool {

using PatientIndex = std::size_t;

/// A pool is a set of patient indices. Stored sorted ascending, which makes
/// it its own order-insensitive identity.
using Pool = std::vector<PatientIndex>;

/// Binary patient-state vector (0 = uninfected, 1 = infected).
using BinaryVector = std::vector<std::uint8_t>;

class InvalidIndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InfeasibleDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sorts and validates a pool against `n_patients`: non-empty, in range,
/// no repeated index.
Pool canonical_pool(Pool pool, std::size_t n_patients);

/// Pooling matrix stored as a bipartite patient/pool graph. Rows (pools) are
/// ordered; both adjacency directions are kept in sync.
class PoolingDesign {
 public:
  PoolingDesign() = default;
  explicit PoolingDesign(std::size_t n_patients);
  PoolingDesign(std::size_t n_patients, std::vector<Pool> pools);

  std::size_t n_patients() const { return n_patients_; }
  std::size_t n_pools() const { return pools_.size(); }
  std::size_t n_edges() const { return n_edges_; }

  /// Patients in pool `mu`, ascending.
  std::span<const PatientIndex> pool(std::size_t mu) const { return pools_.at(mu); }
  /// Pools containing patient `i`, ascending.
  std::span<const std::size_t> pools_of(PatientIndex i) const { return memberships_.at(i); }

  const std::vector<Pool>& pools() const { return pools_; }

  /// Appends a row. Duplicates of existing pools are accepted here.
  void append(Pool pool);

  friend bool operator==(const PoolingDesign&, const PoolingDesign&) = default;

 private:
  std::size_t n_patients_ = 0;
  std::size_t n_edges_ = 0;
  std::vector<Pool> pools_;
  std::vector<std::vector<std::size_t>> memberships_;
};

/// Value-semantics form of PoolingDesign::append.
PoolingDesign append_pool(PoolingDesign design, Pool pool);

/// Noiseless pool result: 1 iff some member of `pool` is infected.
std::uint8_t pool_truth(std::span<const std::uint8_t> x, std::span<const PatientIndex> pool);

/// Parameters of the doubly-regular initial design: every pool has
/// `pool_size` patients and every patient sits in `patient_degree()` pools.
struct InitialDesignSpec {
  std::size_t n_patients = 0;
  std::size_t n_pools = 0;
  std::size_t pool_size = 0;

  /// pool_size * n_pools / n_patients; throws InfeasibleDesignError when
  /// that is not a positive integer or pool_size exceeds n_patients.
  std::size_t patient_degree() const;
};

/// Random design with exact row sums `pool_size` and column sums
/// `patient_degree()`. Built by configuration-model stub pairing; pools with
/// a repeated patient are repaired by random stub swaps, at most
/// 100 * n_pools attempts before giving up with InfeasibleDesignError.
PoolingDesign generate_random_design(const InitialDesignSpec& spec, Rng& rng);

/// `size` distinct patients chosen uniformly from [0, n_patients).
Pool sample_uniform_pool(std::size_t n_patients, std::size_t size, Rng& rng);

}  // namespace activepool
