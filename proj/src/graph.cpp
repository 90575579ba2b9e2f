#include "activepool/graph.hpp"

#include <algorithm>
#include <numeric>

namespace activepool {

Pool canonical_pool(Pool pool, std::size_t n_patients) {
  if (pool.empty()) {
    throw std::invalid_argument("pool must be non-empty");
  }
  std::sort(pool.begin(), pool.end());
  if (pool.back() >= n_patients) {
    throw InvalidIndexError("patient index " + std::to_string(pool.back()) +
                            " out of range for " + std::to_string(n_patients) + " patients");
  }
  if (std::adjacent_find(pool.begin(), pool.end()) != pool.end()) {
    throw std::invalid_argument("pool contains a repeated patient index");
  }
  return pool;
}

PoolingDesign::PoolingDesign(std::size_t n_patients)
    : n_patients_(n_patients), memberships_(n_patients) {}

PoolingDesign::PoolingDesign(std::size_t n_patients, std::vector<Pool> pools)
    : PoolingDesign(n_patients) {
  pools_.reserve(pools.size());
  for (auto& p : pools) {
    append(std::move(p));
  }
}

void PoolingDesign::append(Pool pool) {
  pool = canonical_pool(std::move(pool), n_patients_);
  const std::size_t mu = pools_.size();
  for (PatientIndex i : pool) {
    memberships_[i].push_back(mu);
  }
  n_edges_ += pool.size();
  pools_.push_back(std::move(pool));
}

PoolingDesign append_pool(PoolingDesign design, Pool pool) {
  design.append(std::move(pool));
  return design;
}

std::uint8_t pool_truth(std::span<const std::uint8_t> x, std::span<const PatientIndex> pool) {
  std::uint8_t t = 0;
  for (PatientIndex i : pool) {
    if (i >= x.size()) {
      throw InvalidIndexError("patient index out of range in pool_truth");
    }
    t |= x[i] != 0 ? 1 : 0;
  }
  return t;
}

std::size_t InitialDesignSpec::patient_degree() const {
  if (n_patients == 0 || n_pools == 0 || pool_size == 0) {
    throw InfeasibleDesignError("design spec counts must be positive");
  }
  if (pool_size > n_patients) {
    throw InfeasibleDesignError("pool size exceeds number of patients");
  }
  const std::size_t stubs = pool_size * n_pools;
  if (stubs % n_patients != 0) {
    throw InfeasibleDesignError("pool_size * n_pools / n_patients = " + std::to_string(stubs) +
                                "/" + std::to_string(n_patients) + " is not an integer");
  }
  return stubs / n_patients;
}

namespace {

bool slot_range_contains(const std::vector<PatientIndex>& slots, std::size_t begin,
                         std::size_t end, PatientIndex p) {
  return std::find(slots.begin() + static_cast<std::ptrdiff_t>(begin),
                   slots.begin() + static_cast<std::ptrdiff_t>(end), p) !=
         slots.begin() + static_cast<std::ptrdiff_t>(end);
}

// Slot s holds a patient that also appears earlier in the same pool.
bool is_repeat(const std::vector<PatientIndex>& slots, std::size_t s, std::size_t pool_size) {
  const std::size_t begin = (s / pool_size) * pool_size;
  return slot_range_contains(slots, begin, s, slots[s]);
}

}  // namespace

PoolingDesign generate_random_design(const InitialDesignSpec& spec, Rng& rng) {
  const std::size_t degree = spec.patient_degree();
  const std::size_t g = spec.pool_size;
  const std::size_t n_slots = g * spec.n_pools;

  std::vector<PatientIndex> slots;
  slots.reserve(n_slots);
  for (PatientIndex i = 0; i < spec.n_patients; ++i) {
    slots.insert(slots.end(), degree, i);
  }
  std::shuffle(slots.begin(), slots.end(), rng);

  const std::size_t budget = 100 * spec.n_pools;
  std::size_t attempts = 0;
  std::uniform_int_distribution<std::size_t> pick_slot(0, n_slots - 1);

  for (;;) {
    std::vector<std::size_t> repeats;
    for (std::size_t s = 0; s < n_slots; ++s) {
      if (is_repeat(slots, s, g)) {
        repeats.push_back(s);
      }
    }
    if (repeats.empty()) {
      break;
    }
    for (std::size_t s : repeats) {
      if (!is_repeat(slots, s, g)) {
        continue;
      }
      const std::size_t a_begin = (s / g) * g;
      const PatientIndex a = slots[s];
      for (;;) {
        if (++attempts > budget) {
          throw InfeasibleDesignError("could not repair repeated patients within " +
                                      std::to_string(budget) + " swap attempts");
        }
        const std::size_t t = pick_slot(rng);
        const std::size_t b_begin = (t / g) * g;
        const PatientIndex b = slots[t];
        if (b_begin == a_begin || b == a) continue;
        if (slot_range_contains(slots, a_begin, a_begin + g, b)) continue;
        if (slot_range_contains(slots, b_begin, b_begin + g, a)) continue;
        std::swap(slots[s], slots[t]);
        break;
      }
    }
  }

  PoolingDesign design(spec.n_patients);
  for (std::size_t mu = 0; mu < spec.n_pools; ++mu) {
    design.append(Pool(slots.begin() + static_cast<std::ptrdiff_t>(mu * g),
                       slots.begin() + static_cast<std::ptrdiff_t>((mu + 1) * g)));
  }
  return design;
}

Pool sample_uniform_pool(std::size_t n_patients, std::size_t size, Rng& rng) {
  if (size == 0 || size > n_patients) {
    throw InfeasibleDesignError("cannot draw " + std::to_string(size) + " distinct patients from " +
                                std::to_string(n_patients));
  }
  // Sparse partial Fisher-Yates: only displaced positions are remembered.
  std::vector<std::pair<std::size_t, std::size_t>> moved;
  auto value_at = [&](std::size_t k) {
    for (auto it = moved.rbegin(); it != moved.rend(); ++it) {
      if (it->first == k) return it->second;
    }
    return k;
  };
  Pool pool;
  pool.reserve(size);
  for (std::size_t k = 0; k < size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n_patients - 1);
    const std::size_t r = pick(rng);
    const std::size_t vr = value_at(r);
    const std::size_t vk = value_at(k);
    pool.push_back(vr);
    moved.emplace_back(r, vk);
    moved.emplace_back(k, vr);
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace activepool
