#pragma once

#include <span>
#include <string>
#include <vector>

#include "starq/common.hpp"

namespace starq {

enum class Kind { Qubit, Coupler, Resonator };

const char* kind_name(Kind k);
Kind parse_kind(const std::string& s);

struct Subsystem {
  std::string id;
  Kind kind = Kind::Qubit;
  int dim = 3;
};

// Ordered tensor-product layout; basis indices are row-major in declaration
// order (the last subsystem varies fastest).
class Layout {
 public:
  Layout() = default;
  explicit Layout(std::vector<Subsystem> subsystems);

  int size() const { return static_cast<int>(subs_.size()); }
  long dim() const { return dim_; }
  const Subsystem& operator[](int k) const { return subs_[k]; }
  const std::vector<Subsystem>& subsystems() const { return subs_; }

  int index_of(const std::string& id) const;
  bool contains(const std::string& id) const;
  long stride(int k) const { return strides_[k]; }
  int levels(int k) const { return subs_[k].dim; }
  int digit(long idx, int k) const { return static_cast<int>((idx / strides_[k]) % subs_[k].dim); }

  long index(std::span<const int> occupation) const;
  std::vector<int> occupation(long idx) const;

  bool operator==(const Layout& o) const;

 private:
  std::vector<Subsystem> subs_;
  std::vector<long> strides_;
  long dim_ = 1;
};

// Convenience: qubits (dim 3) followed by a resonator with n_max + 1 levels.
Layout qubits_and_resonator(const std::vector<std::string>& qubit_ids, const std::string& resonator_id,
                            int n_max);

Operator annihilation(int dim);
Operator number_op(int dim);

State basis_state(const Layout& layout, std::span<const int> occupation);

// Lifts `op` (acting on `targets`, row-major in the given target order) to the
// full space. Dense result, so only meant for small layouts.
Operator embed(const Layout& layout, const Operator& op, std::span<const int> targets);
Operator embed(const Layout& layout, const Operator& op, const std::vector<std::string>& target_ids);

// Full-space offsets of the local indices of `targets` and the base indices
// (all target digits zero). Reusable for every operator on the same targets.
struct LocalIndex {
  std::vector<long> offsets;
  std::vector<long> bases;
};
LocalIndex local_index(const Layout& layout, std::span<const int> targets);

// In-place local contraction of `op` on `targets`; never forms the full matrix.
// Only the nonzero entries of `op` are visited.
void apply(const Layout& layout, const Operator& op, std::span<const int> targets, State& psi);
void apply(const LocalIndex& idx, const Operator& op, State& psi);
void apply_diagonal(const LocalIndex& idx, const Eigen::VectorXcd& diag, State& psi);

// Diagonal local operator given by its diagonal entries.
void apply_diagonal(const Layout& layout, const Eigen::VectorXcd& diag, std::span<const int> targets,
                    State& psi);

// Applies a (non-unitary) jump operator and renormalizes. Returns the squared
// norm before renormalization.
double apply_jump(const Layout& layout, const Operator& op, std::span<const int> targets, State& psi);

// Marginal populations of subsystem k.
Eigen::VectorXd populations(const Layout& layout, const State& psi, int k);
Eigen::VectorXd populations(const Layout& layout, const State& psi, const std::string& id);

// Joint populations P(a = i, b = j).
Eigen::MatrixXd joint_populations(const Layout& layout, const State& psi, int a, int b);

// Probabilities of every assignment of the listed subsystems restricted to
// levels < 2 (g/e or 0/1), as a row-major table of size 2^|ks|. Population in
// higher levels is dropped (reported separately by the caller if needed).
Eigen::VectorXd binary_populations(const Layout& layout, const State& psi, std::span<const int> ks);

// |<target|psi>|^2
double state_fidelity(const State& psi, const State& target);

}  // namespace starq
