#pragma once
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace coinpop {

// Dense two-phase primal simplex for the small LPs this project builds
// (hundreds of variables). Maximizes c'x subject to equality and
// upper-bound rows with x >= 0. Dantzig pricing with a switch to Bland's
// rule to rule out cycling.
struct LpProblem {
  int num_vars = 0;
  std::vector<std::vector<double>> eq_rows;
  std::vector<double> eq_rhs;
  std::vector<std::vector<double>> ub_rows;
  std::vector<double> ub_rhs;
  std::vector<double> objective;  // maximized
};

struct LpResult {
  enum class Status { optimal, infeasible, unbounded, iteration_limit };
  Status status = Status::optimal;
  double objective = 0.0;
  std::vector<double> x;
};

class SimplexSolver {
 public:
  explicit SimplexSolver(const LpProblem& p) : p_(p) {}

  LpResult solve() {
    build_tableau();
    if (!run_phase(true)) return result_;
    if (phase1_value() > kFeasTol) {
      result_.status = LpResult::Status::infeasible;
      return result_;
    }
    setup_phase2();
    if (!run_phase(false)) return result_;
    extract();
    return result_;
  }

 private:
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kFeasTol = 1e-7;

  void build_tableau() {
    n_ = p_.num_vars;
    m_eq_ = static_cast<int>(p_.eq_rows.size());
    m_ub_ = static_cast<int>(p_.ub_rows.size());
    m_ = m_eq_ + m_ub_;
    n_slack_ = m_ub_;
    n_art_ = m_;
    total_ = n_ + n_slack_ + n_art_;
    T_.assign(m_ + 1, std::vector<double>(total_ + 1, 0.0));
    basis_.assign(m_, 0);

    for (int i = 0; i < m_eq_; ++i) {
      double sgn = p_.eq_rhs[i] < 0.0 ? -1.0 : 1.0;
      for (int j = 0; j < n_; ++j) T_[i][j] = sgn * p_.eq_rows[i][j];
      T_[i][total_] = sgn * p_.eq_rhs[i];
    }
    for (int i = 0; i < m_ub_; ++i) {
      int r = m_eq_ + i;
      double sgn = p_.ub_rhs[i] < 0.0 ? -1.0 : 1.0;
      for (int j = 0; j < n_; ++j) T_[r][j] = sgn * p_.ub_rows[i][j];
      T_[r][n_ + i] = sgn;  // slack
      T_[r][total_] = sgn * p_.ub_rhs[i];
    }
    for (int i = 0; i < m_; ++i) {
      T_[i][n_ + n_slack_ + i] = 1.0;
      basis_[i] = n_ + n_slack_ + i;
    }
    // Phase-1 objective: minimize sum of artificials.
    auto& z = T_[m_];
    for (int j = 0; j <= total_; ++j) z[j] = 0.0;
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j <= total_; ++j) z[j] -= T_[i][j];
    for (int i = 0; i < m_; ++i) z[n_ + n_slack_ + i] = 0.0;
    in_phase1_ = true;
  }

  double phase1_value() const { return -T_[m_][total_]; }

  void setup_phase2() {
    // Pivot any surviving artificial out of the basis, or accept it stuck at
    // zero in a redundant row.
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_ + n_slack_) continue;
      int enter = -1;
      for (int j = 0; j < n_ + n_slack_; ++j)
        if (std::abs(T_[i][j]) > kPivotTol) {
          enter = j;
          break;
        }
      if (enter >= 0) pivot(i, enter);
    }
    // Rebuild the reduced-cost row from the real objective (minimize -c'x).
    auto& z = T_[m_];
    for (int j = 0; j <= total_; ++j) z[j] = 0.0;
    for (int j = 0; j < n_; ++j) z[j] = -p_.objective[j];
    for (int i = 0; i < m_; ++i) {
      double cb = basis_[i] < n_ ? -p_.objective[basis_[i]] : 0.0;
      if (cb == 0.0) continue;
      for (int j = 0; j <= total_; ++j) z[j] -= cb * T_[i][j];
    }
    in_phase1_ = false;
  }

  bool run_phase(bool phase1) {
    const long bland_after = 2000;
    const long max_iters = 500000;
    for (long iter = 0; iter < max_iters; ++iter) {
      bool bland = iter >= bland_after;
      int enter = pick_entering(bland);
      if (enter < 0) return true;  // optimal for this phase
      int leave = pick_leaving(enter, bland);
      if (leave < 0) {
        result_.status = phase1 ? LpResult::Status::infeasible
                                : LpResult::Status::unbounded;
        return false;
      }
      pivot(leave, enter);
    }
    result_.status = LpResult::Status::iteration_limit;
    return false;
  }

  int allowed_columns() const {
    return in_phase1_ ? total_ : n_ + n_slack_;
  }

  int pick_entering(bool bland) const {
    int cols = allowed_columns();
    if (bland) {
      for (int j = 0; j < cols; ++j)
        if (T_[m_][j] < -kPivotTol) return j;
      return -1;
    }
    int best = -1;
    double most = -kPivotTol;
    for (int j = 0; j < cols; ++j)
      if (T_[m_][j] < most) {
        most = T_[m_][j];
        best = j;
      }
    return best;
  }

  int pick_leaving(int enter, bool bland) const {
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m_; ++i) {
      double a = T_[i][enter];
      if (a <= kPivotTol) continue;
      double ratio = T_[i][total_] / a;
      if (ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && best >= 0 && bland &&
           basis_[i] < basis_[best])) {
        best_ratio = ratio;
        best = i;
      }
    }
    return best;
  }

  void pivot(int row, int col) {
    double piv = T_[row][col];
    for (int j = 0; j <= total_; ++j) T_[row][j] /= piv;
    T_[row][col] = 1.0;
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      double f = T_[i][col];
      if (f == 0.0) continue;
      for (int j = 0; j <= total_; ++j) T_[i][j] -= f * T_[row][j];
      T_[i][col] = 0.0;
    }
    basis_[row] = col;
  }

  void extract() {
    result_.status = LpResult::Status::optimal;
    result_.x.assign(n_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) result_.x[basis_[i]] = T_[i][total_];
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += p_.objective[j] * result_.x[j];
    result_.objective = obj;
  }

  const LpProblem& p_;
  std::vector<std::vector<double>> T_;
  std::vector<int> basis_;
  LpResult result_;
  int n_ = 0, m_eq_ = 0, m_ub_ = 0, m_ = 0;
  int n_slack_ = 0, n_art_ = 0, total_ = 0;
  bool in_phase1_ = true;
};

inline LpResult solve_lp(const LpProblem& p) { return SimplexSolver(p).solve(); }

}  // namespace coinpop
