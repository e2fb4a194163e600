#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gssctl/binmatrix.hpp"
#include "gssctl/qp.hpp"
#include "gssctl/robust.hpp"
#include "gssctl/rollout.hpp"
#include "gssctl/stacked.hpp"

namespace gssctl {

/// Malformed input. line() is 1-based, 0 when unknown.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& source, int line, const std::string& field, const std::string& msg);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// "rows cols" followed by one line of 0/1 tokens per row. '#' starts a comment.
BinMatrix read_pattern(std::istream& in, const std::string& source = "<pattern>");
BinMatrix load_pattern(const std::string& path);
void write_pattern(std::ostream& out, const BinMatrix& x);

/// Generic keyed file: a "<magic> <version>" line, then entries
///   int NAME value | real NAME value
///   vector NAME k <k numbers> | matrix NAME r c <r*c numbers, row-major>
///   pattern NAME r c <r*c 0/1 tokens>
/// Numbers may wrap over lines; "inf" and "-inf" are accepted.
class KeyedFile {
 public:
  struct Entry {
    std::string kind;
    Index rows = 0, cols = 0;
    std::vector<double> data;
    int line = 0;
  };

  static KeyedFile parse(std::istream& in, const std::string& magic, const std::string& source);
  static KeyedFile load(const std::string& path, const std::string& magic);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  int version() const { return version_; }
  const std::string& source() const { return source_; }

  long get_int(const std::string& name) const;
  double get_real(const std::string& name) const;
  /// rows/cols < 0 accept any size.
  Eigen::MatrixXd get_matrix(const std::string& name, Index rows = -1, Index cols = -1) const;
  Eigen::VectorXd get_vector(const std::string& name, Index size = -1) const;
  BinMatrix get_pattern(const std::string& name, Index rows = -1, Index cols = -1) const;

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const;

 private:
  const Entry& entry(const std::string& name, const std::string& kind) const;

  std::string source_;
  int version_ = 0;
  std::map<std::string, Entry> entries_;
};

/// Writers for the keyed format; doubles use 17 significant digits so data
/// files round-trip exactly.
void write_keyed_header(std::ostream& out, const std::string& magic, int version);
void write_int(std::ostream& out, const std::string& name, long value);
void write_real(std::ostream& out, const std::string& name, double value);
void write_vector(std::ostream& out, const std::string& name, const Eigen::VectorXd& v);
void write_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m);
void write_pattern_entry(std::ostream& out, const std::string& name, const BinMatrix& x);

inline constexpr const char* kProblemMagic = "gssctl-problem";
inline constexpr const char* kControllerMagic = "gssctl-controller";
inline constexpr const char* kReportMagic = "gssctl-report";
inline constexpr const char* kQpMagic = "gssctl-qp";
inline constexpr int kFormatVersion = 1;

/// Everything synth needs. T and Y, when present, are stacked m(N+1) x p(N+1)
/// patterns that replace the default choice (Sbold, ymax(Sbold)).
struct ProblemData {
  SystemModel sys;
  ConstraintSet cons;
  InfoStructure info;
  int N = 0;
  Eigen::VectorXd x0;
  DisturbanceSet dist;
  CostSpec cost;
  std::optional<BinMatrix> T, Y;
};

ProblemData read_problem(std::istream& in, const std::string& source = "<problem>");
ProblemData load_problem(const std::string& path);
void write_problem(std::ostream& out, const ProblemData& pd);

/// Synthesized policy u = L y + g, with the disturbance-feedback pair (Q, v).
struct ControllerData {
  Index n = 0, m = 0, p = 0;
  int N = 0;
  Eigen::MatrixXd L, Q;
  Eigen::VectorXd g, v;
};

ControllerData read_controller(std::istream& in, const std::string& source = "<controller>");
ControllerData load_controller(const std::string& path);
void write_controller(std::ostream& out, const ControllerData& cd);

/// Ordered "key value" lines under a versioned header; numbers at 12 significant digits.
class Report {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, long value);
  void add(const std::string& key, int value) { add(key, static_cast<long>(value)); }
  void add(const std::string& key, bool value);
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void write(std::ostream& out) const;
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

/// "%.12g", with inf and nan spelled out.
std::string fmt(double x);

/// Whitespace table, one row per stage k = 0..N:
///   stage x_0.. u_0.. y_0.. w_0.. slack_0..(s) terminal_0..(r)
/// u_N and w_N are zero; stage slacks are nan at k = N, terminal slacks nan before.
void write_trajectory(std::ostream& out, const Trajectory& traj, const ConstraintSet& cons);

/// Plain-text triplets:
///   gssctl-qp 1 / dims n m / constant c / P i j v (upper triangle) /
///   A i j v / q i v / bounds i l u / var name offset size / row name offset size
void write_qp(std::ostream& out, const QpProblem& qp);
QpProblem read_qp(std::istream& in, const std::string& source = "<qp>");

}  // namespace gssctl
