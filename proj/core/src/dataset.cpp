#include "vflsim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "vflsim/rng.hpp"

namespace vflsim {

namespace {

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);  // "+1" labels
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_int(std::string_view text, long& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

RawDataset parse_libsvm_stream(std::istream& in) {
  RawDataset data;
  std::string line;
  long lineno = 0;
  int max_index = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest = trim(line);
    if (rest.empty() || rest.front() == '#') continue;

    SparseRow row;
    // label token
    auto sp = rest.find_first_of(" \t");
    std::string_view label_tok = rest.substr(0, sp);
    double y;
    if (!parse_double(label_tok, y)) throw ParseError("bad label token", lineno, 1);
    rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));

    int last_idx = -1;
    while (!rest.empty()) {
      sp = rest.find_first_of(" \t");
      std::string_view tok = rest.substr(0, sp);
      rest = sp == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp));
      if (tok.empty()) continue;
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError("feature token missing ':'", lineno);
      long idx1;
      double v;
      if (!parse_int(tok.substr(0, colon), idx1) || idx1 < 1)
        throw ParseError("bad feature index", lineno);
      if (!parse_double(tok.substr(colon + 1), v)) throw ParseError("bad feature value", lineno);
      const int idx0 = static_cast<int>(idx1 - 1);
      if (idx0 <= last_idx) throw ParseError("feature indices must be strictly increasing", lineno);
      last_idx = idx0;
      row.idx.push_back(idx0);
      row.val.push_back(v);
      max_index = std::max(max_index, idx0);
    }
    data.labels.push_back(y);
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) throw EmptyDataError("no samples in LIBSVM input");
  data.n = static_cast<int>(data.rows.size());
  data.d = max_index + 1;
  if (data.d == 0) throw EmptyDataError("LIBSVM input has no features");
  return data;
}

RawDataset parse_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path, 0);
  return parse_libsvm_stream(in);
}

void write_libsvm(std::ostream& out, const RawDataset& data) {
  out.precision(17);
  for (int i = 0; i < data.n; ++i) {
    out << data.labels[i];
    const auto& row = data.rows[i];
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
      out << ' ' << (row.idx[k] + 1) << ':' << row.val[k];
    }
    out << '\n';
  }
}

RawDataset parse_csv_stream(std::istream& in, int label_column) {
  RawDataset data;
  std::string line;
  long lineno = 0;
  int ncols = -1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    if (!header_seen) {
      header_seen = true;  // header row, column names ignored
      continue;
    }
    std::vector<double> cells;
    std::string_view remaining = rest;
    long col = 0;
    while (true) {
      ++col;
      auto comma = remaining.find(',');
      std::string_view cell = trim(remaining.substr(0, comma));
      double v;
      if (!parse_double(cell, v))
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", lineno, col);
      cells.push_back(v);
      if (comma == std::string_view::npos) break;
      remaining = remaining.substr(comma + 1);
    }
    if (ncols < 0) {
      ncols = static_cast<int>(cells.size());
      if (label_column < 0 || label_column >= ncols)
        throw ParseError("label column out of range", lineno);
    } else if (static_cast<int>(cells.size()) != ncols) {
      throw ParseError("inconsistent column count", lineno);
    }
    SparseRow row;
    for (int c = 0, f = 0; c < ncols; ++c) {
      if (c == label_column) continue;
      if (cells[c] != 0.0) {
        row.idx.push_back(f);
        row.val.push_back(cells[c]);
      }
      ++f;
    }
    data.labels.push_back(cells[label_column]);
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) throw EmptyDataError("no samples in CSV input");
  data.n = static_cast<int>(data.rows.size());
  data.d = ncols - 1;

  // {0,1} labels are treated as binary classes and mapped to {-1,+1}.
  bool zero_one = std::all_of(data.labels.begin(), data.labels.end(),
                              [](double y) { return y == 0.0 || y == 1.0; });
  if (zero_one) {
    for (double& y : data.labels) y = (y == 1.0) ? 1.0 : -1.0;
  }
  return data;
}

RawDataset parse_csv(const std::string& path, int label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path, 0);
  return parse_csv_stream(in, label_column);
}

LabelScaling minmax_normalize_labels(RawDataset& data) {
  if (data.n == 0) throw EmptyDataError("empty dataset");
  auto [mn, mx] = std::minmax_element(data.labels.begin(), data.labels.end());
  LabelScaling scaling{*mn, *mx};
  for (double& y : data.labels) y = scaling.apply(y);
  return scaling;
}

void minmax_normalize_features(RawDataset& data) {
  if (data.n == 0) throw EmptyDataError("empty dataset");
  std::vector<double> mn(data.d, std::numeric_limits<double>::infinity());
  std::vector<double> mx(data.d, -std::numeric_limits<double>::infinity());
  for (const auto& row : data.rows) {
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
      mn[row.idx[k]] = std::min(mn[row.idx[k]], row.val[k]);
      mx[row.idx[k]] = std::max(mx[row.idx[k]], row.val[k]);
    }
  }
  // implicit zeros participate in the range
  for (int f = 0; f < data.d; ++f) {
    mn[f] = std::min(mn[f], 0.0);
    mx[f] = std::max(mx[f], 0.0);
  }
  for (auto& row : data.rows) {
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
      const int f = row.idx[k];
      row.val[k] = mx[f] > mn[f] ? (row.val[k] - mn[f]) / (mx[f] - mn[f]) : 0.0;
    }
  }
}

std::pair<RawDataset, RawDataset> train_test_split(const RawDataset& data, double test_fraction,
                                                   std::uint64_t seed) {
  if (data.n < 2) throw EmptyDataError("need at least 2 samples to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidInputError("test_fraction must be in (0,1)");

  std::vector<int> order(data.n);
  std::iota(order.begin(), order.end(), 0);
  auto eng = make_engine(seed, /*tag=*/0x73706c6974ULL);
  std::shuffle(order.begin(), order.end(), eng);

  int n_test = static_cast<int>(std::lround(test_fraction * data.n));
  n_test = std::clamp(n_test, 1, data.n - 1);

  RawDataset train, test;
  train.d = test.d = data.d;
  for (int k = 0; k < data.n; ++k) {
    RawDataset& dst = (k < n_test) ? test : train;
    dst.rows.push_back(data.rows[order[k]]);
    dst.labels.push_back(data.labels[order[k]]);
  }
  train.n = static_cast<int>(train.rows.size());
  test.n = static_cast<int>(test.rows.size());
  return {std::move(train), std::move(test)};
}

PartitionedDataset PartitionedDataset::vertical_split(const RawDataset& data, int q,
                                                      std::uint64_t seed) {
  return vertical_split(data, make_partition(data.d, q, seed));
}

PartitionedDataset PartitionedDataset::vertical_split(const RawDataset& data,
                                                      FeaturePartition partition) {
  if (data.n == 0) throw EmptyDataError("empty dataset");
  if (partition.d != data.d) throw DimensionError("partition dimension does not match dataset");

  PartitionedDataset out;
  out.n_ = data.n;
  out.partition_ = std::move(partition);
  out.labels_ = data.labels;

  // global feature id -> (party, local position)
  std::vector<std::pair<int, int>> where(out.partition_.d);
  for (int l = 0; l < out.partition_.q; ++l) {
    const auto& idx = out.partition_.blocks[l];
    for (std::size_t k = 0; k < idx.size(); ++k) where[idx[k]] = {l, static_cast<int>(k)};
  }

  out.blocks_.assign(out.partition_.q, std::vector<SparseRow>(data.n));
  for (int i = 0; i < data.n; ++i) {
    const auto& row = data.rows[i];
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
      auto [party, local] = where[row.idx[k]];
      out.blocks_[party][i].idx.push_back(local);
      out.blocks_[party][i].val.push_back(row.val[k]);
    }
  }
  for (auto& party_rows : out.blocks_) {
    for (auto& row : party_rows) {
      // local indices follow the sorted block order, so rows stay sorted;
      // enforce anyway for safety with pre-built partitions
      std::vector<std::size_t> perm(row.idx.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::sort(perm.begin(), perm.end(),
                [&](std::size_t a, std::size_t b) { return row.idx[a] < row.idx[b]; });
      SparseRow sorted;
      sorted.idx.reserve(row.idx.size());
      sorted.val.reserve(row.val.size());
      for (std::size_t p : perm) {
        sorted.idx.push_back(row.idx[p]);
        sorted.val.push_back(row.val[p]);
      }
      row = std::move(sorted);
    }
  }
  return out;
}

const SparseRow& PartitionedDataset::row_block(int party, int i) const {
  partition_.check_party(party);
  if (i < 0 || i >= n_) throw IndexError("sample index out of range");
  return blocks_[party][i];
}

void PartitionedDataset::grant_label_access(std::span<const int> active_party_ids) {
  label_access_.assign(active_party_ids.begin(), active_party_ids.end());
}

bool PartitionedDataset::has_label_access(int party_id) const {
  return std::find(label_access_.begin(), label_access_.end(), party_id) != label_access_.end();
}

double PartitionedDataset::label(int i, const PartyRole& as) const {
  if (i < 0 || i >= n_) throw IndexError("sample index out of range");
  if (!as.active()) throw RoleError("passive party attempted to read a label");
  if (!label_access_.empty() && !has_label_access(as.party_id))
    throw RoleError("party has no label access grant");
  return labels_[i];
}

double PartitionedDataset::block_inner_product(std::span<const double> w, int party, int i) const {
  const SparseRow& row = row_block(party, i);
  const auto& global = partition_.blocks[party];
  double acc = 0.0;
  for (std::size_t k = 0; k < row.idx.size(); ++k) acc += w[global[row.idx[k]]] * row.val[k];
  return acc;
}

double PartitionedDataset::full_inner_product(std::span<const double> w, int i) const {
  double acc = 0.0;
  for (int l = 0; l < partition_.q; ++l) acc += block_inner_product(w, l, i);
  return acc;
}

PartitionedDataset vertical_partition_dataset(const RawDataset& data, int q, std::uint64_t seed) {
  return PartitionedDataset::vertical_split(data, q, seed);
}

}  // namespace vflsim
