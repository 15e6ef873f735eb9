#include "stratboot/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "stratboot/errors.hpp"

namespace stratboot {

void ParamPoint::validate(int q) const {
  if (static_cast<int>(lambda.size()) != q)
    throw InvalidInput("parameter point has " + std::to_string(lambda.size()) +
                       " nuisance components, dataset has " + std::to_string(q) +
                       " strata");
  if (!std::isfinite(psi)) throw InvalidInput("psi is not finite");
  for (double l : lambda)
    if (!std::isfinite(l)) throw InvalidInput("lambda component is not finite");
}

long StratifiedDataset::total_obs() const {
  long n = 0;
  for (const auto& s : y) n += static_cast<long>(s.size());
  return n;
}

void StratifiedDataset::validate() const {
  if (y.empty()) throw InvalidInput("dataset has no strata");
  for (size_t i = 0; i < y.size(); ++i)
    if (y[i].size() < 2)
      throw InvalidInput("stratum " + std::to_string(i + 1) +
                         " has fewer than 2 observations");
  if (!x.empty()) {
    if (x.size() != y.size())
      throw InvalidInput("covariate strata count does not match observations");
    for (size_t i = 0; i < y.size(); ++i)
      if (x[i].size() != y[i].size())
        throw InvalidInput("covariate shape mismatch in stratum " +
                           std::to_string(i + 1));
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, long line_no, const char* what) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidInput("line " + std::to_string(line_no) + ": cannot parse " +
                       what + " from '" + s + "'");
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos != s.size())
    throw InvalidInput("line " + std::to_string(line_no) + ": trailing junk in '" +
                       s + "'");
  return v;
}

}  // namespace

StratifiedDataset StratifiedDataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset file: " + path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw InvalidInput("empty dataset file: " + path);
  ++line_no;
  auto header = split_fields(line);
  bool with_x;
  if (header.size() == 2 && header[0] == "stratum" && header[1] == "y")
    with_x = false;
  else if (header.size() == 3 && header[0] == "stratum" && header[1] == "y" &&
           header[2] == "x")
    with_x = true;
  else
    throw InvalidInput("line 1: expected header 'stratum,y' or 'stratum,y,x'");

  // stratum ids must be 1..q but rows may arrive in any order
  std::map<long, std::pair<std::vector<double>, std::vector<double>>> groups;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_fields(line);
    if (f.size() != header.size())
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, found " +
                         std::to_string(f.size()));
    double sid = parse_double(f[0], line_no, "stratum id");
    long id = static_cast<long>(sid);
    if (sid != static_cast<double>(id) || id < 1)
      throw InvalidInput("line " + std::to_string(line_no) +
                         ": stratum id must be a positive integer");
    double yv = parse_double(f[1], line_no, "y");
    auto& g = groups[id];
    g.first.push_back(yv);
    if (with_x) g.second.push_back(parse_double(f[2], line_no, "x"));
  }
  if (groups.empty()) throw InvalidInput("dataset has no data rows");
  long q = static_cast<long>(groups.size());
  StratifiedDataset d;
  for (long i = 1; i <= q; ++i) {
    auto it = groups.find(i);
    if (it == groups.end())
      throw InvalidInput("stratum ids must cover 1..q; missing stratum " +
                         std::to_string(i));
    d.y.push_back(std::move(it->second.first));
    if (with_x) d.x.push_back(std::move(it->second.second));
  }
  d.validate();
  return d;
}

void StratifiedDataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write dataset file: " + path);
  out << (has_covariates() ? "stratum,y,x\n" : "stratum,y\n");
  char buf[64];
  for (size_t i = 0; i < y.size(); ++i) {
    for (size_t j = 0; j < y[i].size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", y[i][j]);
      out << (i + 1) << ',' << buf;
      if (has_covariates()) {
        std::snprintf(buf, sizeof buf, "%.17g", x[i][j]);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace stratboot
