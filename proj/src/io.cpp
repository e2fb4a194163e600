#include "gssctl/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace gssctl {

namespace {

struct Token {
  std::string text;
  int line = 0;
};

std::vector<Token> tokenize(std::istream& in) {
  std::vector<Token> out;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back({tok, no});
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s == "inf" || s == "+inf") {
    out = kInf;
    return true;
  }
  if (s == "-inf") {
    out = -kInf;
    return true;
  }
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e && !std::isnan(out);
}

bool parse_long(const std::string& s, long& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::string full(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError(path, 0, "", "cannot open file");
  return f;
}

}  // namespace

FormatError::FormatError(const std::string& source, int line, const std::string& field, const std::string& msg)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         (field.empty() ? std::string() : ": field '" + field + "'") + ": " + msg),
      line_(line),
      field_(field) {}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// ---------------------------------------------------------------- patterns

BinMatrix read_pattern(std::istream& in, const std::string& source) {
  std::string line;
  int no = 0;
  auto next = [&](std::vector<std::string>& toks) {
    while (std::getline(in, line)) {
      ++no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream ss(line);
      toks.clear();
      std::string t;
      while (ss >> t) toks.push_back(t);
      if (!toks.empty()) return true;
    }
    return false;
  };
  std::vector<std::string> toks;
  if (!next(toks)) throw FormatError(source, no, "dims", "empty pattern file");
  long r = 0, c = 0;
  if (toks.size() != 2 || !parse_long(toks[0], r) || !parse_long(toks[1], c) || r < 0 || c < 0)
    throw FormatError(source, no, "dims", "expected 'rows cols'");
  BinMatrix x(r, c);
  for (long i = 0; i < r; ++i) {
    if (!next(toks)) throw FormatError(source, no, "row " + std::to_string(i), "missing row");
    if (static_cast<long>(toks.size()) != c)
      throw FormatError(source, no, "row " + std::to_string(i),
                        "expected " + std::to_string(c) + " entries, got " + std::to_string(toks.size()));
    for (long j = 0; j < c; ++j) {
      if (toks[static_cast<std::size_t>(j)] == "1")
        x.set(i, j);
      else if (toks[static_cast<std::size_t>(j)] != "0")
        throw FormatError(source, no, "row " + std::to_string(i), "entry '" + toks[static_cast<std::size_t>(j)] + "' is not 0/1");
    }
  }
  if (next(toks)) throw FormatError(source, no, "", "trailing data after " + std::to_string(r) + " rows");
  return x;
}

BinMatrix load_pattern(const std::string& path) {
  auto f = open_in(path);
  return read_pattern(f, path);
}

void write_pattern(std::ostream& out, const BinMatrix& x) {
  out << x.rows() << ' ' << x.cols() << '\n';
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) out << (j ? " " : "") << (x(i, j) ? '1' : '0');
    out << '\n';
  }
}

// ---------------------------------------------------------------- keyed files

KeyedFile KeyedFile::parse(std::istream& in, const std::string& magic, const std::string& source) {
  KeyedFile kf;
  kf.source_ = source;
  const std::vector<Token> toks = tokenize(in);
  std::size_t pos = 0;
  auto at_end = [&] { return pos >= toks.size(); };
  const int last_line = toks.empty() ? 0 : toks.back().line;

  if (toks.size() < 2 || toks[0].text != magic)
    throw FormatError(source, toks.empty() ? 0 : toks[0].line, "header", "expected '" + magic + " <version>'");
  long ver = 0;
  if (!parse_long(toks[1].text, ver) || toks[1].line != toks[0].line)
    throw FormatError(source, toks[0].line, "header", "bad version");
  if (ver != kFormatVersion)
    throw FormatError(source, toks[0].line, "header", "unsupported version " + std::to_string(ver));
  kf.version_ = static_cast<int>(ver);
  pos = 2;

  auto take = [&](const std::string& field, const char* what) -> const Token& {
    if (at_end()) throw FormatError(source, last_line, field, std::string("unexpected end of file, expected ") + what);
    return toks[pos++];
  };
  auto take_size = [&](const std::string& field) {
    const Token& t = take(field, "a size");
    long v = 0;
    if (!parse_long(t.text, v) || v < 0) throw FormatError(source, t.line, field, "bad size '" + t.text + "'");
    return static_cast<Index>(v);
  };

  while (!at_end()) {
    const Token& kind = toks[pos++];
    const Token& name = take("", "an entry name");
    if (name.line != kind.line) throw FormatError(source, kind.line, kind.text, "entry name missing");
    if (kf.entries_.count(name.text)) throw FormatError(source, name.line, name.text, "duplicate entry");
    Entry e;
    e.kind = kind.text;
    e.line = kind.line;
    if (kind.text == "int" || kind.text == "real") {
      const Token& t = take(name.text, "a value");
      double v = 0;
      long iv = 0;
      if (kind.text == "int" ? !parse_long(t.text, iv) : !parse_double(t.text, v))
        throw FormatError(source, t.line, name.text, "bad " + kind.text + " '" + t.text + "'");
      e.rows = e.cols = 1;
      e.data = {kind.text == "int" ? static_cast<double>(iv) : v};
    } else if (kind.text == "vector" || kind.text == "matrix" || kind.text == "pattern") {
      e.rows = take_size(name.text);
      e.cols = kind.text == "vector" ? 1 : take_size(name.text);
      const Index count = e.rows * e.cols;
      e.data.reserve(static_cast<std::size_t>(count));
      for (Index k = 0; k < count; ++k) {
        const Token& t = take(name.text, "more entries");
        double v = 0;
        if (kind.text == "pattern") {
          if (t.text != "0" && t.text != "1")
            throw FormatError(source, t.line, name.text, "entry '" + t.text + "' is not 0/1");
          v = t.text == "1" ? 1.0 : 0.0;
        } else if (!parse_double(t.text, v)) {
          throw FormatError(source, t.line, name.text, "bad number '" + t.text + "'");
        }
        e.data.push_back(v);
      }
    } else {
      throw FormatError(source, kind.line, name.text, "unknown entry kind '" + kind.text + "'");
    }
    kf.entries_.emplace(name.text, std::move(e));
  }
  return kf;
}

KeyedFile KeyedFile::load(const std::string& path, const std::string& magic) {
  auto f = open_in(path);
  return parse(f, magic, path);
}

void KeyedFile::fail(const std::string& field, const std::string& msg) const {
  const auto it = entries_.find(field);
  throw FormatError(source_, it == entries_.end() ? 0 : it->second.line, field, msg);
}

const KeyedFile::Entry& KeyedFile::entry(const std::string& name, const std::string& kind) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError(source_, 0, name, "required " + kind + " entry missing");
  if (it->second.kind != kind)
    throw FormatError(source_, it->second.line, name, "expected a " + kind + ", found a " + it->second.kind);
  return it->second;
}

long KeyedFile::get_int(const std::string& name) const {
  return static_cast<long>(entry(name, "int").data[0]);
}

double KeyedFile::get_real(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it != entries_.end() && it->second.kind == "int") return it->second.data[0];
  return entry(name, "real").data[0];
}

Eigen::MatrixXd KeyedFile::get_matrix(const std::string& name, Index rows, Index cols) const {
  const Entry& e = entry(name, "matrix");
  if ((rows >= 0 && e.rows != rows) || (cols >= 0 && e.cols != cols))
    throw FormatError(source_, e.line, name,
                      "expected " + (rows >= 0 ? std::to_string(rows) : std::string("*")) + "x" +
                          (cols >= 0 ? std::to_string(cols) : std::string("*")) + ", got " + std::to_string(e.rows) +
                          "x" + std::to_string(e.cols));
  Eigen::MatrixXd m(e.rows, e.cols);
  for (Index i = 0; i < e.rows; ++i)
    for (Index j = 0; j < e.cols; ++j) m(i, j) = e.data[static_cast<std::size_t>(i * e.cols + j)];
  return m;
}

Eigen::VectorXd KeyedFile::get_vector(const std::string& name, Index size) const {
  const Entry& e = entry(name, "vector");
  if (size >= 0 && e.rows != size)
    throw FormatError(source_, e.line, name,
                      "expected " + std::to_string(size) + " entries, got " + std::to_string(e.rows));
  return Eigen::Map<const Eigen::VectorXd>(e.data.data(), e.rows);
}

BinMatrix KeyedFile::get_pattern(const std::string& name, Index rows, Index cols) const {
  const Entry& e = entry(name, "pattern");
  if ((rows >= 0 && e.rows != rows) || (cols >= 0 && e.cols != cols))
    throw FormatError(source_, e.line, name,
                      "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                          std::to_string(e.rows) + "x" + std::to_string(e.cols));
  BinMatrix x(e.rows, e.cols);
  for (Index i = 0; i < e.rows; ++i)
    for (Index j = 0; j < e.cols; ++j)
      if (e.data[static_cast<std::size_t>(i * e.cols + j)] != 0.0) x.set(i, j);
  return x;
}

void write_keyed_header(std::ostream& out, const std::string& magic, int version) {
  out << magic << ' ' << version << '\n';
}

void write_int(std::ostream& out, const std::string& name, long value) {
  out << "int " << name << ' ' << value << '\n';
}

void write_real(std::ostream& out, const std::string& name, double value) {
  out << "real " << name << ' ' << full(value) << '\n';
}

void write_vector(std::ostream& out, const std::string& name, const Eigen::VectorXd& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << full(v(i));
  out << '\n';
}

void write_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << full(m(i, j));
    out << '\n';
  }
}

void write_pattern_entry(std::ostream& out, const std::string& name, const BinMatrix& x) {
  out << "pattern " << name << ' ';
  write_pattern(out, x);
}

// ---------------------------------------------------------------- problem files

ProblemData read_problem(std::istream& in, const std::string& source) {
  const KeyedFile kf = KeyedFile::parse(in, kProblemMagic, source);
  ProblemData pd;
  const long N = kf.get_int("N");
  if (N < 1) kf.fail("N", "horizon must be at least 1");
  pd.N = static_cast<int>(N);

  pd.sys.A = kf.get_matrix("A");
  const Index n = pd.sys.A.rows();
  if (n == 0 || pd.sys.A.cols() != n) kf.fail("A", "must be square and nonempty");
  pd.sys.B = kf.get_matrix("B", n, -1);
  pd.sys.C = kf.get_matrix("C", -1, n);
  const Index m = pd.sys.B.cols(), p = pd.sys.C.rows();
  if (m == 0) kf.fail("B", "needs at least one input");
  if (p == 0) kf.fail("C", "needs at least one output");
  pd.sys.D = kf.has("D") ? kf.get_matrix("D", n, n) : Eigen::MatrixXd::Identity(n, n);
  pd.sys.H = kf.has("H") ? kf.get_matrix("H", p, n) : Eigen::MatrixXd::Zero(p, n);

  pd.cons = ConstraintSet::empty(n, m);
  if (kf.has("U") || kf.has("V") || kf.has("b")) {
    pd.cons.U = kf.get_matrix("U", -1, n);
    pd.cons.V = kf.get_matrix("V", pd.cons.U.rows(), m);
    pd.cons.b = kf.get_vector("b", pd.cons.U.rows());
  }
  if (kf.has("R") || kf.has("z")) {
    pd.cons.R = kf.get_matrix("R", -1, n);
    pd.cons.z = kf.get_vector("z", pd.cons.R.rows());
  }
  pd.x0 = kf.get_vector("x0", n);

  // Information structure: a repeated block S, or per-block entries S_k_j.
  pd.info.horizon = pd.N;
  if (kf.has("S")) {
    pd.info = InfoStructure::repeated(pd.N, kf.get_pattern("S", m, p));
  } else {
    bool any = false;
    for (const auto& [name, e] : kf.entries()) {
      int k = 0, j = 0;
      char tail = 0;
      if (std::sscanf(name.c_str(), "S_%d_%d%c", &k, &j, &tail) != 2) continue;
      if (j < 0 || j > k || k >= pd.N) kf.fail(name, "block index outside 0 <= j <= k < N");
      pd.info.blocks.emplace(std::make_pair(k, j), kf.get_pattern(name, m, p));
      any = true;
    }
    if (!any) throw FormatError(source, 0, "S", "information structure missing (S or S_k_j entries)");
  }

  if (kf.has("dist_box")) {
    pd.dist = DisturbanceSet::box(kf.get_vector("dist_box", n));
  } else if (kf.has("dist_M")) {
    const Eigen::MatrixXd M = kf.get_matrix("dist_M", -1, n);
    pd.dist = DisturbanceSet::polytope(M, kf.get_vector("dist_h", M.rows()));
  } else {
    throw FormatError(source, 0, "dist_box", "disturbance set missing (dist_box or dist_M/dist_h)");
  }
  try {
    pd.dist.validate(n);
  } catch (const std::invalid_argument& e) {
    kf.fail(kf.has("dist_box") ? "dist_box" : "dist_M", e.what());
  }

  pd.cost = CostSpec::zero(n, m, pd.N);
  auto rows_of = [&](const std::string& name, Index count, Index width, std::vector<Eigen::VectorXd>& dst) {
    if (!kf.has(name)) return;
    const Eigen::MatrixXd w = kf.get_matrix(name, count, width);
    for (Index k = 0; k < count; ++k) dst[static_cast<std::size_t>(k)] = w.row(k).transpose();
  };
  rows_of("state_weights", pd.N + 1, n, pd.cost.state_weights);
  rows_of("state_refs", pd.N + 1, n, pd.cost.state_refs);
  rows_of("input_weights", pd.N, m, pd.cost.input_weights);
  try {
    pd.cost.validate(n, m, pd.N);
  } catch (const std::invalid_argument& e) {
    kf.fail(kf.has("state_weights") ? "state_weights" : "input_weights", e.what());
  }

  const Index rows_u = m * (pd.N + 1), cols_y = p * (pd.N + 1);
  if (kf.has("T")) pd.T = kf.get_pattern("T", rows_u, cols_y);
  if (kf.has("Y")) pd.Y = kf.get_pattern("Y", rows_u, rows_u);
  if (pd.Y && !pd.T) kf.fail("Y", "Y given without T");
  return pd;
}

ProblemData load_problem(const std::string& path) {
  auto f = open_in(path);
  return read_problem(f, path);
}

void write_problem(std::ostream& out, const ProblemData& pd) {
  write_keyed_header(out, kProblemMagic, kFormatVersion);
  write_int(out, "N", pd.N);
  write_matrix(out, "A", pd.sys.A);
  write_matrix(out, "B", pd.sys.B);
  write_matrix(out, "C", pd.sys.C);
  write_matrix(out, "D", pd.sys.D);
  write_matrix(out, "H", pd.sys.H);
  write_matrix(out, "U", pd.cons.U);
  write_matrix(out, "V", pd.cons.V);
  write_vector(out, "b", pd.cons.b);
  write_matrix(out, "R", pd.cons.R);
  write_vector(out, "z", pd.cons.z);
  write_vector(out, "x0", pd.x0);
  for (const auto& [kj, block] : pd.info.blocks)
    write_pattern_entry(out, "S_" + std::to_string(kj.first) + "_" + std::to_string(kj.second), block);
  if (pd.dist.kind == DisturbanceSet::Kind::box) {
    write_vector(out, "dist_box", pd.dist.d);
  } else {
    write_matrix(out, "dist_M", pd.dist.M);
    write_vector(out, "dist_h", pd.dist.h);
  }
  auto stack_rows = [](const std::vector<Eigen::VectorXd>& v) {
    Eigen::MatrixXd w(static_cast<Index>(v.size()), v.empty() ? 0 : v.front().size());
    for (std::size_t k = 0; k < v.size(); ++k) w.row(static_cast<Index>(k)) = v[k].transpose();
    return w;
  };
  write_matrix(out, "state_weights", stack_rows(pd.cost.state_weights));
  write_matrix(out, "state_refs", stack_rows(pd.cost.state_refs));
  write_matrix(out, "input_weights", stack_rows(pd.cost.input_weights));
  if (pd.T) write_pattern_entry(out, "T", *pd.T);
  if (pd.Y) write_pattern_entry(out, "Y", *pd.Y);
}

// ---------------------------------------------------------------- controllers

ControllerData read_controller(std::istream& in, const std::string& source) {
  const KeyedFile kf = KeyedFile::parse(in, kControllerMagic, source);
  ControllerData cd;
  const long N = kf.get_int("N"), n = kf.get_int("n"), m = kf.get_int("m"), p = kf.get_int("p");
  if (N < 1) kf.fail("N", "horizon must be at least 1");
  if (n < 1) kf.fail("n", "must be positive");
  if (m < 1) kf.fail("m", "must be positive");
  if (p < 1) kf.fail("p", "must be positive");
  cd.N = static_cast<int>(N);
  cd.n = n;
  cd.m = m;
  cd.p = p;
  const Index ru = m * (N + 1), cy = p * (N + 1);
  cd.L = kf.get_matrix("L", ru, cy);
  cd.g = kf.get_vector("g", ru);
  if (kf.has("Q")) cd.Q = kf.get_matrix("Q", ru, cy);
  if (kf.has("v")) cd.v = kf.get_vector("v", ru);
  return cd;
}

ControllerData load_controller(const std::string& path) {
  auto f = open_in(path);
  return read_controller(f, path);
}

void write_controller(std::ostream& out, const ControllerData& cd) {
  write_keyed_header(out, kControllerMagic, kFormatVersion);
  write_int(out, "n", cd.n);
  write_int(out, "m", cd.m);
  write_int(out, "p", cd.p);
  write_int(out, "N", cd.N);
  write_matrix(out, "L", cd.L);
  write_vector(out, "g", cd.g);
  if (cd.Q.size()) write_matrix(out, "Q", cd.Q);
  if (cd.v.size()) write_vector(out, "v", cd.v);
}

// ---------------------------------------------------------------- reports

void Report::add(const std::string& key, const std::string& value) { items_.emplace_back(key, value); }
void Report::add(const std::string& key, double value) { items_.emplace_back(key, fmt(value)); }
void Report::add(const std::string& key, long value) { items_.emplace_back(key, std::to_string(value)); }
void Report::add(const std::string& key, bool value) { items_.emplace_back(key, value ? "true" : "false"); }

void Report::write(std::ostream& out) const {
  write_keyed_header(out, kReportMagic, kFormatVersion);
  for (const auto& [k, v] : items_) out << k << ' ' << v << '\n';
}

void write_trajectory(std::ostream& out, const Trajectory& traj, const ConstraintSet& cons) {
  const int N = traj.horizon();
  const Index n = traj.x.front().size(), m = traj.u.empty() ? cons.V.cols() : traj.u.front().size();
  const Index p = traj.y.front().size();
  const Index nw = traj.w.empty() ? n : traj.w.front().size();
  const SlackReport sr = verify_constraints(traj, cons);
  const Index s = cons.s(), r = cons.r();

  out << "# gssctl-trajectory " << kFormatVersion << "\nstage";
  for (Index i = 0; i < n; ++i) out << " x" << i;
  for (Index i = 0; i < m; ++i) out << " u" << i;
  for (Index i = 0; i < p; ++i) out << " y" << i;
  for (Index i = 0; i < nw; ++i) out << " w" << i;
  for (Index i = 0; i < s; ++i) out << " slack" << i;
  for (Index i = 0; i < r; ++i) out << " terminal" << i;
  out << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k <= N; ++k) {
    const auto sk = static_cast<std::size_t>(k);
    out << k;
    for (Index i = 0; i < n; ++i) out << ' ' << fmt(traj.x[sk](i));
    for (Index i = 0; i < m; ++i) out << ' ' << fmt(k < N ? traj.u[sk](i) : 0.0);
    for (Index i = 0; i < p; ++i) out << ' ' << fmt(traj.y[sk](i));
    for (Index i = 0; i < nw; ++i) out << ' ' << fmt(k < N ? traj.w[sk](i) : 0.0);
    for (Index i = 0; i < s; ++i) out << ' ' << fmt(k < N ? sr.slacks(k * s + i) : nan);
    for (Index i = 0; i < r; ++i) out << ' ' << fmt(k == N ? sr.slacks(N * s + i) : nan);
    out << '\n';
  }
}

// ---------------------------------------------------------------- QP triplets

void write_qp(std::ostream& out, const QpProblem& qp) {
  out << kQpMagic << ' ' << kFormatVersion << '\n';
  out << "dims " << qp.num_vars() << ' ' << qp.num_rows() << '\n';
  out << "constant " << full(qp.constant) << '\n';
  for (int j = 0; j < qp.P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(qp.P, j); it; ++it)
      if (it.row() <= j) out << "P " << it.row() << ' ' << j << ' ' << full(it.value()) << '\n';
  for (int j = 0; j < qp.A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(qp.A, j); it; ++it)
      out << "A " << it.row() << ' ' << j << ' ' << full(it.value()) << '\n';
  for (Index i = 0; i < qp.q.size(); ++i)
    if (qp.q(i) != 0.0) out << "q " << i << ' ' << full(qp.q(i)) << '\n';
  for (Index i = 0; i < qp.num_rows(); ++i) out << "bounds " << i << ' ' << full(qp.l(i)) << ' ' << full(qp.u(i)) << '\n';
  for (const Span& s : qp.vars) out << "var " << s.name << ' ' << s.offset << ' ' << s.size << '\n';
  for (const Span& s : qp.rows) out << "row " << s.name << ' ' << s.offset << ' ' << s.size << '\n';
}

QpProblem read_qp(std::istream& in, const std::string& source) {
  std::string line;
  int no = 0;
  auto fields = [&](std::vector<std::string>& f) {
    while (std::getline(in, line)) {
      ++no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream ss(line);
      f.clear();
      std::string t;
      while (ss >> t) f.push_back(t);
      if (!f.empty()) return true;
    }
    return false;
  };
  std::vector<std::string> f;
  if (!fields(f) || f.size() != 2 || f[0] != kQpMagic || f[1] != std::to_string(kFormatVersion))
    throw FormatError(source, no, "header", std::string("expected '") + kQpMagic + " 1'");
  long n = -1, m = -1;
  QpProblem qp;
  std::vector<Eigen::Triplet<double, int>> tp, ta;
  auto idx = [&](const std::string& s, long bound, const std::string& what) {
    long v = 0;
    if (!parse_long(s, v) || v < 0 || v >= bound) throw FormatError(source, no, what, "index '" + s + "' out of range");
    return v;
  };
  auto num = [&](const std::string& s, const std::string& what) {
    double v = 0;
    if (!parse_double(s, v)) throw FormatError(source, no, what, "bad number '" + s + "'");
    return v;
  };
  auto arity = [&](std::size_t k) {
    if (f.size() != k) throw FormatError(source, no, f[0], "expected " + std::to_string(k - 1) + " fields");
  };
  while (fields(f)) {
    const std::string& key = f[0];
    if (key == "dims") {
      arity(3);
      if (!parse_long(f[1], n) || !parse_long(f[2], m) || n < 0 || m < 0)
        throw FormatError(source, no, "dims", "bad dimensions");
      qp.q = Eigen::VectorXd::Zero(n);
      qp.l = Eigen::VectorXd::Constant(m, -kInf);
      qp.u = Eigen::VectorXd::Constant(m, kInf);
      continue;
    }
    if (n < 0) throw FormatError(source, no, key, "'dims' must come first");
    if (key == "constant") {
      arity(2);
      qp.constant = num(f[1], key);
    } else if (key == "P") {
      arity(4);
      const long i = idx(f[1], n, key), j = idx(f[2], n, key);
      if (i > j) throw FormatError(source, no, key, "only the upper triangle is stored");
      const double v = num(f[3], key);
      tp.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
      if (i != j) tp.emplace_back(static_cast<int>(j), static_cast<int>(i), v);
    } else if (key == "A") {
      arity(4);
      ta.emplace_back(static_cast<int>(idx(f[1], m, key)), static_cast<int>(idx(f[2], n, key)), num(f[3], key));
    } else if (key == "q") {
      arity(3);
      qp.q(idx(f[1], n, key)) = num(f[2], key);
    } else if (key == "bounds") {
      arity(4);
      const long i = idx(f[1], m, key);
      qp.l(i) = num(f[2], key);
      qp.u(i) = num(f[3], key);
    } else if (key == "var" || key == "row") {
      arity(4);
      long off = 0, size = 0;
      if (!parse_long(f[2], off) || !parse_long(f[3], size)) throw FormatError(source, no, key, "bad span");
      (key == "var" ? qp.vars : qp.rows).push_back({f[1], off, size});
    } else {
      throw FormatError(source, no, key, "unknown record");
    }
  }
  if (n < 0) throw FormatError(source, no, "dims", "missing");
  qp.P.resize(n, n);
  qp.P.setFromTriplets(tp.begin(), tp.end());
  qp.A.resize(m, n);
  qp.A.setFromTriplets(ta.begin(), ta.end());
  try {
    qp.validate();
  } catch (const std::exception& e) {
    throw FormatError(source, 0, "", e.what());
  }
  return qp;
}

}  // namespace gssctl
