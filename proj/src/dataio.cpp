#include "care/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace care {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return false;
  return std::isfinite(out);
}

}  // namespace

LoadResult load_csv(const std::string& path,
                    const std::optional<std::string>& truth_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  int truth_col = -1;
  if (truth_column) {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == *truth_column) truth_col = static_cast<int>(j);
    if (truth_col < 0)
      throw std::runtime_error("truth column not found: " + *truth_column);
  }

  std::vector<std::string> judge_names;
  for (size_t j = 0; j < header.size(); ++j)
    if (static_cast<int>(j) != truth_col) judge_names.push_back(header[j]);
  {
    std::set<std::string> uniq(judge_names.begin(), judge_names.end());
    if (uniq.size() != judge_names.size())
      throw std::runtime_error("duplicate judge names in header");
  }

  const int ncol = static_cast<int>(header.size());
  std::vector<std::vector<double>> rows;
  std::vector<double> truth_vals;
  std::vector<int> bad_per_col(ncol, 0);
  int total_rows = 0;
  int dropped = 0;

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++total_rows;
    std::vector<std::string> cells = split_line(line);
    if (static_cast<int>(cells.size()) != ncol) {
      ++dropped;
      continue;
    }
    std::vector<double> row;
    double tv = 0.0;
    bool ok = true;
    for (int j = 0; j < ncol; ++j) {
      double v;
      if (!parse_double(cells[j], v)) {
        ++bad_per_col[j];
        ok = false;
        continue;
      }
      if (j == truth_col)
        tv = v;
      else
        row.push_back(v);
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(row));
    if (truth_col >= 0) truth_vals.push_back(tv);
  }

  // Mirrors the judge-exclusion rule: a judge with >10% bad cells is rejected.
  std::vector<std::string> bad_judges;
  for (int j = 0; j < ncol; ++j) {
    if (j == truth_col) continue;
    if (total_rows > 0 && bad_per_col[j] > 0.10 * total_rows) {
      int jj = j - (truth_col >= 0 && j > truth_col ? 1 : 0);
      bad_judges.push_back(judge_names[jj]);
    }
  }
  if (!bad_judges.empty()) {
    std::string msg = "judges with >10% unparseable cells:";
    for (const auto& b : bad_judges) msg += " " + b;
    throw std::runtime_error(msg);
  }

  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(judge_names.size());
  if (n < 2 || p < 2)
    throw std::runtime_error("score matrix requires n >= 2 and p >= 2");

  ScoreMatrix m;
  m.values.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) m.values(i, j) = rows[i][j];
  m.judge_names = judge_names;
  if (truth_col >= 0) {
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) t(i) = truth_vals[i];
    m.truth = t;
  }
  return {std::move(m), dropped};
}

void save_csv(const std::string& path, const ScoreMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (int j = 0; j < m.p(); ++j) {
    if (j) out << ',';
    out << m.judge_names[j];
  }
  if (m.truth) out << ",truth";
  out << '\n';
  char buf[64];
  for (int i = 0; i < m.n(); ++i) {
    for (int j = 0; j < m.p(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", m.values(i, j));
      out << buf;
    }
    if (m.truth) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*m.truth)(i));
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::pair<ScoreMatrix, Standardization> standardize(const ScoreMatrix& m) {
  const int n = m.n(), p = m.p();
  Standardization st;
  st.mean.resize(p);
  st.stddev.resize(p);
  ScoreMatrix out = m;
  for (int j = 0; j < p; ++j) {
    const double mu = m.values.col(j).mean();
    const double var = (m.values.col(j).array() - mu).square().sum() / n;
    if (var <= 0.0)
      throw std::runtime_error("zero-variance judge column: " + m.judge_names[j]);
    const double sd = std::sqrt(var);
    st.mean(j) = mu;
    st.stddev(j) = sd;
    out.values.col(j) = (m.values.col(j).array() - mu) / sd;
  }
  return {std::move(out), std::move(st)};
}

Split make_split(int n, double val_frac, std::uint64_t seed) {
  if (val_frac <= 0.0 || val_frac >= 1.0)
    throw std::invalid_argument("val_frac must lie in (0,1)");
  const int nval = static_cast<int>(std::lround(val_frac * n));
  if (nval < 1) throw std::invalid_argument("validation set would be empty");
  if (nval >= n) throw std::invalid_argument("validation set would cover all rows");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  Split s;
  s.val_idx.assign(idx.begin(), idx.begin() + nval);
  s.train_idx.assign(idx.begin() + nval, idx.end());
  std::sort(s.val_idx.begin(), s.val_idx.end());
  std::sort(s.train_idx.begin(), s.train_idx.end());
  return s;
}

ScoreMatrix take_rows(const ScoreMatrix& m, const std::vector<int>& idx) {
  ScoreMatrix out;
  out.judge_names = m.judge_names;
  out.task_kind = m.task_kind;
  out.values.resize(static_cast<int>(idx.size()), m.p());
  for (size_t i = 0; i < idx.size(); ++i) out.values.row(i) = m.values.row(idx[i]);
  if (m.truth) {
    Eigen::VectorXd t(static_cast<int>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) t(i) = (*m.truth)(idx[i]);
    out.truth = t;
  }
  return out;
}

}  // namespace care
