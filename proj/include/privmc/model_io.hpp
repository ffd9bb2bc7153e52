#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "privmc/frank_wolfe.hpp"
#include "privmc/pgd.hpp"

namespace privmc {

namespace detail {
inline void print17(std::ostream& out, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out << buf;
}
inline std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(std::string("model: truncated before ") + what);
  return line;
}
}  // namespace detail

// Text formats; every double prints with 17 significant digits, which
// round-trips IEEE doubles exactly.
//
// factored:
//   privmc-model factored <num_users> <num_items> <rank> <k> <L>
//   means <u_0> ... <u_{m-1}>
//   basis <n values>            (rank lines)
//   coeff <rank values>         (num_users lines)
// dense:
//   privmc-model dense <num_users> <num_items>
//   means <u_0> ... <u_{m-1}>
//   row <n values>              (num_users lines)
inline void save_model(const FactoredModel& model, std::ostream& out) {
  out << "privmc-model factored " << model.num_users << ' ' << model.num_items << ' '
      << model.rank() << ' ';
  detail::print17(out, model.nuclear_bound);
  out << ' ';
  detail::print17(out, model.row_bound);
  out << '\n' << "means";
  for (double m : model.means) {
    out << ' ';
    detail::print17(out, m);
  }
  out << '\n';
  for (const Eigen::VectorXd& b : model.basis) {
    out << "basis";
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      out << ' ';
      detail::print17(out, b[j]);
    }
    out << '\n';
  }
  for (std::uint64_t u = 0; u < model.num_users; ++u) {
    out << "coeff";
    for (double c : model.coeff_row(u)) {
      out << ' ';
      detail::print17(out, c);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("model: write failed");
}

inline void save_model(const DenseModel& model, std::ostream& out) {
  out << "privmc-model dense " << model.values.rows() << ' ' << model.values.cols()
      << '\n' << "means";
  for (double m : model.means) {
    out << ' ';
    detail::print17(out, m);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < model.values.rows(); ++i) {
    out << "row";
    for (Eigen::Index j = 0; j < model.values.cols(); ++j) {
      out << ' ';
      detail::print17(out, model.values(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("model: write failed");
}

namespace detail {
inline void expect_word(std::istringstream& in, const char* word) {
  std::string got;
  if (!(in >> got) || got != word)
    throw std::runtime_error(std::string("model: expected '") + word + "', got '" +
                             got + "'");
}
}  // namespace detail

inline std::string peek_model_kind(std::istream& in) {
  // does not consume; callers decide which loader to run
  const auto pos = in.tellg();
  std::string magic, kind;
  in >> magic >> kind;
  in.clear();
  in.seekg(pos);
  if (magic != "privmc-model")
    throw std::runtime_error("model: bad magic '" + magic + "'");
  return kind;
}

inline FactoredModel load_factored_model(std::istream& in) {
  std::istringstream header(detail::read_line(in, "header"));
  detail::expect_word(header, "privmc-model");
  detail::expect_word(header, "factored");
  FactoredModel model;
  std::size_t rank = 0;
  if (!(header >> model.num_users >> model.num_items >> rank >>
        model.nuclear_bound >> model.row_bound))
    throw std::runtime_error("model: bad factored header");

  std::istringstream means(detail::read_line(in, "means"));
  detail::expect_word(means, "means");
  model.means.assign(model.num_users, 0.0);
  for (auto& m : model.means)
    if (!(means >> m)) throw std::runtime_error("model: means line too short");

  model.basis.reserve(rank);
  for (std::size_t t = 0; t < rank; ++t) {
    std::istringstream basis(detail::read_line(in, "basis"));
    detail::expect_word(basis, "basis");
    Eigen::VectorXd b(model.num_items);
    for (Eigen::Index j = 0; j < model.num_items; ++j)
      if (!(basis >> b[j])) throw std::runtime_error("model: basis line too short");
    model.basis.push_back(std::move(b));
  }
  model.coeffs.assign(model.num_users * rank, 0.0);
  for (std::uint64_t u = 0; u < model.num_users; ++u) {
    std::istringstream coeff(detail::read_line(in, "coeff"));
    detail::expect_word(coeff, "coeff");
    for (std::size_t t = 0; t < rank; ++t)
      if (!(coeff >> model.coeffs[u * rank + t]))
        throw std::runtime_error("model: coeff line too short");
  }
  return model;
}

inline DenseModel load_dense_model(std::istream& in) {
  std::istringstream header(detail::read_line(in, "header"));
  detail::expect_word(header, "privmc-model");
  detail::expect_word(header, "dense");
  Eigen::Index m = 0, n = 0;
  if (!(header >> m >> n)) throw std::runtime_error("model: bad dense header");
  DenseModel model;
  model.num_items = n;

  std::istringstream means(detail::read_line(in, "means"));
  detail::expect_word(means, "means");
  model.means.assign(static_cast<std::size_t>(m), 0.0);
  for (auto& v : model.means)
    if (!(means >> v)) throw std::runtime_error("model: means line too short");

  model.values.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    std::istringstream row(detail::read_line(in, "row"));
    detail::expect_word(row, "row");
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(row >> model.values(i, j)))
        throw std::runtime_error("model: row line too short");
  }
  return model;
}

}  // namespace privmc
