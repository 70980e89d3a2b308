#include "ido/dataset.hpp"

#include <stdexcept>

#include "ido/csvio.hpp"
#include "ido/errors.hpp"

namespace ido {

std::vector<char> Dataset::noise_mask() const {
  std::vector<char> mask(size());
  for (size_t i = 0; i < size(); ++i) mask[i] = given_labels[i] != true_labels[i];
  return mask;
}

size_t Dataset::noisy_count() const {
  size_t n = 0;
  for (size_t i = 0; i < size(); ++i) n += given_labels[i] != true_labels[i];
  return n;
}

bool Dataset::is_clean() const { return noisy_count() == 0; }

void Dataset::validate() const {
  const size_t n = given_labels.size();
  if (true_labels.size() != n)
    throw std::invalid_argument("dataset: given/true label lengths differ");
  if (n_classes < 1) throw std::invalid_argument("dataset: n_classes must be >= 1");
  if (dim < 1) throw std::invalid_argument("dataset: dim must be >= 1");
  if (features.size() != n * static_cast<size_t>(dim))
    throw std::invalid_argument("dataset: feature matrix size mismatch");
  for (size_t i = 0; i < n; ++i) {
    if (given_labels[i] < 0 || given_labels[i] >= n_classes || true_labels[i] < 0 ||
        true_labels[i] >= n_classes)
      throw std::invalid_argument("dataset: label out of range at index " + std::to_string(i));
  }
}

Dataset load_csv(const std::string& path) {
  const CsvFile csv = read_csv(path);
  const auto& h = csv.header;
  if (h.size() < 2) throw parse_error(path + ": header must contain features and labels");

  bool has_true = !h.empty() && h.back() == "true";
  const size_t label_cols = has_true ? 2u : 1u;
  if (h.size() < label_cols + 1) throw parse_error(path + ": no feature columns");
  const size_t d = h.size() - label_cols;
  for (size_t j = 0; j < d; ++j) {
    if (h[j] != "f" + std::to_string(j))
      throw parse_error(path + ": expected column f" + std::to_string(j) + ", got '" + h[j] + "'");
  }
  if (h[d] != "given") throw parse_error(path + ": expected column 'given', got '" + h[d] + "'");

  Dataset ds;
  ds.dim = static_cast<int>(d);
  ds.has_oracle = has_true;
  int max_label = 0;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const size_t line_no = r + 2;
    if (row.size() != h.size())
      throw parse_error(path + ": line " + std::to_string(line_no) + ": expected " +
                        std::to_string(h.size()) + " columns, got " + std::to_string(row.size()));
    for (size_t j = 0; j < d; ++j)
      ds.features.push_back(parse_double_cell(row[j], path, line_no, "f" + std::to_string(j)));
    const int given = parse_int_cell(row[d], path, line_no, "given");
    const int truth = has_true ? parse_int_cell(row[d + 1], path, line_no, "true") : given;
    if (given < 0 || truth < 0)
      throw parse_error(path + ": line " + std::to_string(line_no) + ": negative label");
    ds.given_labels.push_back(given);
    ds.true_labels.push_back(truth);
    max_label = std::max(max_label, std::max(given, truth));
  }
  ds.n_classes = max_label + 1;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  for (int j = 0; j < ds.dim; ++j) out << "f" << j << ",";
  out << "given,true\n";
  for (size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.row(i);
    for (int j = 0; j < ds.dim; ++j) out << format_double(x[j]) << ",";
    out << ds.given_labels[i] << "," << ds.true_labels[i] << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace ido
