#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rng.hpp"

namespace mmlc {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    fail(ErrorCode::MalformedRow, context + ": bad number '" + text + "'");
  return value;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

int intern(std::vector<std::string>& names,
           std::unordered_map<std::string, int>& lookup, const std::string& name) {
  auto it = lookup.find(name);
  if (it != lookup.end()) return it->second;
  int index = static_cast<int>(names.size());
  names.push_back(name);
  lookup.emplace(name, index);
  return index;
}

}  // namespace

CrowdDataset CrowdDataset::create(std::vector<std::string> item_ids,
                                  Eigen::MatrixXd features,
                                  std::vector<std::string> worker_ids,
                                  std::vector<std::string> class_names,
                                  std::vector<LabelTriple> labels,
                                  std::optional<std::vector<int>> truth) {
  if (item_ids.empty()) fail(ErrorCode::EmptyDataset, "dataset has no items");
  if (worker_ids.empty()) fail(ErrorCode::EmptyDataset, "dataset has no workers");
  if (labels.empty()) fail(ErrorCode::EmptyDataset, "dataset has no labels");
  if (class_names.empty()) fail(ErrorCode::InvalidConfig, "dataset has no classes");
  if (features.cols() != static_cast<Eigen::Index>(item_ids.size()) || features.rows() < 1)
    fail(ErrorCode::DimensionMismatch, "feature matrix does not match item count");

  CrowdDataset ds;
  ds.item_ids_ = std::move(item_ids);
  ds.features_ = std::move(features);
  ds.worker_ids_ = std::move(worker_ids);
  ds.class_names_ = std::move(class_names);
  ds.labels_ = std::move(labels);
  ds.truth_ = std::move(truth);

  for (size_t i = 0; i < ds.item_ids_.size(); ++i) {
    if (!ds.item_lookup_.emplace(ds.item_ids_[i], static_cast<int>(i)).second)
      fail(ErrorCode::MalformedRow, "duplicate item id '" + ds.item_ids_[i] + "'");
  }
  for (size_t j = 0; j < ds.worker_ids_.size(); ++j) {
    if (!ds.worker_lookup_.emplace(ds.worker_ids_[j], static_cast<int>(j)).second)
      fail(ErrorCode::MalformedRow, "duplicate worker id '" + ds.worker_ids_[j] + "'");
  }
  for (size_t k = 0; k < ds.class_names_.size(); ++k) {
    if (!ds.class_lookup_.emplace(ds.class_names_[k], static_cast<int>(k)).second)
      fail(ErrorCode::MalformedRow, "duplicate class name '" + ds.class_names_[k] + "'");
  }

  ds.by_item_.resize(ds.item_ids_.size());
  ds.by_worker_.resize(ds.worker_ids_.size());
  for (size_t t = 0; t < ds.labels_.size(); ++t) {
    const LabelTriple& triple = ds.labels_[t];
    if (triple.item < 0 || triple.item >= ds.num_items())
      fail(ErrorCode::UnknownReference, "label references unknown item index");
    if (triple.worker < 0 || triple.worker >= ds.num_workers())
      fail(ErrorCode::UnknownReference, "label references unknown worker index");
    if (triple.label < 0 || triple.label >= ds.num_classes())
      fail(ErrorCode::UnknownReference, "label class index out of range");
    if (!ds.labeled_pairs_.insert(ds.pair_key(triple.item, triple.worker)).second)
      fail(ErrorCode::DuplicateLabel,
           "duplicate label for item '" + ds.item_ids_[triple.item] + "', worker '" +
               ds.worker_ids_[triple.worker] + "'");
    ds.by_item_[triple.item].push_back(static_cast<int>(t));
    ds.by_worker_[triple.worker].push_back(static_cast<int>(t));
  }

  if (ds.truth_.has_value()) {
    if (ds.truth_->size() != ds.item_ids_.size())
      fail(ErrorCode::IncompleteTruth, "truth does not cover every item");
    for (int value : *ds.truth_) {
      if (value < 0 || value >= ds.num_classes())
        fail(ErrorCode::UnknownReference, "truth class index out of range");
    }
  }
  return ds;
}

const std::vector<int>& CrowdDataset::truth() const {
  if (!truth_.has_value()) fail(ErrorCode::MissingTruth, "dataset has no ground truth");
  return *truth_;
}

int CrowdDataset::item_index(const std::string& id) const {
  auto it = item_lookup_.find(id);
  return it == item_lookup_.end() ? -1 : it->second;
}

int CrowdDataset::worker_index(const std::string& id) const {
  auto it = worker_lookup_.find(id);
  return it == worker_lookup_.end() ? -1 : it->second;
}

int CrowdDataset::class_index(const std::string& name) const {
  auto it = class_lookup_.find(name);
  return it == class_lookup_.end() ? -1 : it->second;
}

bool CrowdDataset::same_content(const CrowdDataset& other) const {
  if (item_ids_ != other.item_ids_ || worker_ids_ != other.worker_ids_) return false;
  if (features_.rows() != other.features_.rows()) return false;
  if (features_ != other.features_) return false;
  if (labels_.size() != other.labels_.size()) return false;
  for (size_t t = 0; t < labels_.size(); ++t) {
    const LabelTriple& a = labels_[t];
    const LabelTriple& b = other.labels_[t];
    if (item_ids_[a.item] != other.item_ids_[b.item]) return false;
    if (worker_ids_[a.worker] != other.worker_ids_[b.worker]) return false;
    if (class_names_[a.label] != other.class_names_[b.label]) return false;
    if (a.provenance != b.provenance) return false;
  }
  if (truth_.has_value() != other.truth_.has_value()) return false;
  if (truth_.has_value()) {
    for (int i = 0; i < num_items(); ++i) {
      if (class_names_[(*truth_)[i]] != other.class_names_[(*other.truth_)[i]])
        return false;
    }
  }
  return true;
}

CrowdDataset load_dataset(const std::string& features_path,
                          const std::string& labels_path,
                          const std::optional<std::string>& truth_path) {
  // features.csv
  std::vector<std::string> feature_lines = read_lines(features_path);
  if (feature_lines.size() < 2) fail(ErrorCode::EmptyDataset, features_path + " has no data rows");
  std::vector<std::string> header = split_csv(feature_lines[0]);
  if (header.size() < 2 || header[0] != "item_id")
    fail(ErrorCode::MalformedRow, features_path + ": expected header item_id,f0,...");
  const size_t dim = header.size() - 1;

  std::vector<std::string> item_ids;
  std::vector<double> feature_values;
  for (size_t r = 1; r < feature_lines.size(); ++r) {
    std::vector<std::string> row = split_csv(feature_lines[r]);
    if (row.size() != dim + 1)
      fail(ErrorCode::MalformedRow,
           features_path + " row " + std::to_string(r + 1) + ": expected " +
               std::to_string(dim + 1) + " fields, got " + std::to_string(row.size()));
    item_ids.push_back(row[0]);
    for (size_t c = 1; c < row.size(); ++c)
      feature_values.push_back(parse_double(row[c], features_path + " row " + std::to_string(r + 1)));
  }
  Eigen::MatrixXd features(dim, item_ids.size());
  for (size_t i = 0; i < item_ids.size(); ++i)
    for (size_t f = 0; f < dim; ++f) features(f, i) = feature_values[i * dim + f];

  std::unordered_map<std::string, int> item_lookup;
  for (size_t i = 0; i < item_ids.size(); ++i) {
    if (!item_lookup.emplace(item_ids[i], static_cast<int>(i)).second)
      fail(ErrorCode::MalformedRow, features_path + ": duplicate item id '" + item_ids[i] + "'");
  }

  // labels.csv
  std::vector<std::string> label_lines = read_lines(labels_path);
  if (label_lines.size() < 2) fail(ErrorCode::EmptyDataset, labels_path + " has no data rows");
  std::vector<std::string> label_header = split_csv(label_lines[0]);
  if (label_header.size() < 3 || label_header[0] != "item_id" || label_header[1] != "worker_id")
    fail(ErrorCode::MalformedRow, labels_path + ": expected header item_id,worker_id,label");

  std::vector<std::string> worker_ids;
  std::unordered_map<std::string, int> worker_lookup;
  std::vector<std::string> class_names;
  std::unordered_map<std::string, int> class_lookup;
  std::vector<LabelTriple> labels;
  for (size_t r = 1; r < label_lines.size(); ++r) {
    std::vector<std::string> row = split_csv(label_lines[r]);
    if (row.size() != 3 && row.size() != 4)
      fail(ErrorCode::MalformedRow,
           labels_path + " row " + std::to_string(r + 1) + ": expected 3 or 4 fields");
    auto item_it = item_lookup.find(row[0]);
    if (item_it == item_lookup.end())
      fail(ErrorCode::UnknownReference,
           labels_path + " row " + std::to_string(r + 1) + ": unknown item '" + row[0] + "'");
    LabelTriple triple;
    triple.item = item_it->second;
    triple.worker = intern(worker_ids, worker_lookup, row[1]);
    triple.label = intern(class_names, class_lookup, row[2]);
    if (row.size() == 4) {
      if (row[3] == "orig") triple.provenance = Provenance::Original;
      else if (row[3] == "fill") triple.provenance = Provenance::Filled;
      else
        fail(ErrorCode::MalformedRow,
             labels_path + " row " + std::to_string(r + 1) + ": provenance must be orig or fill");
    }
    labels.push_back(triple);
  }

  // truth.csv
  std::optional<std::vector<int>> truth;
  if (truth_path.has_value()) {
    std::vector<std::string> truth_lines = read_lines(*truth_path);
    if (truth_lines.size() < 2) fail(ErrorCode::EmptyDataset, *truth_path + " has no data rows");
    std::vector<std::string> truth_header = split_csv(truth_lines[0]);
    if (truth_header.size() != 2 || truth_header[0] != "item_id")
      fail(ErrorCode::MalformedRow, *truth_path + ": expected header item_id,label");
    std::vector<int> values(item_ids.size(), -1);
    for (size_t r = 1; r < truth_lines.size(); ++r) {
      std::vector<std::string> row = split_csv(truth_lines[r]);
      if (row.size() != 2)
        fail(ErrorCode::MalformedRow, *truth_path + " row " + std::to_string(r + 1) + ": expected 2 fields");
      auto item_it = item_lookup.find(row[0]);
      if (item_it == item_lookup.end())
        fail(ErrorCode::UnknownReference,
             *truth_path + " row " + std::to_string(r + 1) + ": unknown item '" + row[0] + "'");
      if (values[item_it->second] != -1)
        fail(ErrorCode::MalformedRow,
             *truth_path + " row " + std::to_string(r + 1) + ": duplicate truth for '" + row[0] + "'");
      values[item_it->second] = intern(class_names, class_lookup, row[1]);
    }
    for (size_t i = 0; i < values.size(); ++i) {
      if (values[i] == -1)
        fail(ErrorCode::IncompleteTruth, *truth_path + ": no truth for item '" + item_ids[i] + "'");
    }
    truth = std::move(values);
  }

  // Zero-label items are rejected at ingestion.
  std::vector<bool> covered(item_ids.size(), false);
  for (const LabelTriple& t : labels) covered[t.item] = true;
  for (size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i])
      fail(ErrorCode::UnlabeledItem, "item '" + item_ids[i] + "' has no labels");
  }

  return CrowdDataset::create(std::move(item_ids), std::move(features),
                              std::move(worker_ids), std::move(class_names),
                              std::move(labels), std::move(truth));
}

void save_features_csv(const CrowdDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << "item_id";
  for (int f = 0; f < dataset.feature_dim(); ++f) out << ",f" << f;
  out << "\n";
  for (int i = 0; i < dataset.num_items(); ++i) {
    out << dataset.item_ids()[i];
    for (int f = 0; f < dataset.feature_dim(); ++f)
      out << ',' << format_double(dataset.features()(f, i));
    out << "\n";
  }
}

void save_labels_csv(const CrowdDataset& dataset, const std::string& path) {
  bool any_filled = std::any_of(dataset.labels().begin(), dataset.labels().end(),
                                [](const LabelTriple& t) { return t.provenance == Provenance::Filled; });
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << (any_filled ? "item_id,worker_id,label,provenance" : "item_id,worker_id,label") << "\n";
  for (const LabelTriple& t : dataset.labels()) {
    out << dataset.item_ids()[t.item] << ',' << dataset.worker_ids()[t.worker] << ','
        << dataset.class_names()[t.label];
    if (any_filled) out << ',' << (t.provenance == Provenance::Filled ? "fill" : "orig");
    out << "\n";
  }
}

void save_truth_csv(const CrowdDataset& dataset, const std::string& path) {
  const std::vector<int>& truth = dataset.truth();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << "item_id,label\n";
  for (int i = 0; i < dataset.num_items(); ++i)
    out << dataset.item_ids()[i] << ',' << dataset.class_names()[truth[i]] << "\n";
}

void save_dataset(const CrowdDataset& dataset,
                  const std::string& features_path,
                  const std::string& labels_path,
                  const std::optional<std::string>& truth_path) {
  save_features_csv(dataset, features_path);
  save_labels_csv(dataset, labels_path);
  if (truth_path.has_value()) save_truth_csv(dataset, *truth_path);
}

double density(const CrowdDataset& dataset) {
  if (dataset.num_labels() == 0) fail(ErrorCode::EmptyDataset, "dataset has no labels");
  return static_cast<double>(dataset.num_labels()) /
         (static_cast<double>(dataset.num_workers()) * static_cast<double>(dataset.num_items()));
}

CrowdDataset apply_redundancy_cap(const CrowdDataset& dataset, int max_labels,
                                  uint64_t seed) {
  if (max_labels < 1) fail(ErrorCode::InvalidConfig, "redundancy cap must be >= 1");
  Rng cap_rng = Rng(seed).fork("cap");

  std::vector<bool> keep(dataset.labels().size(), true);
  for (int i = 0; i < dataset.num_items(); ++i) {
    const std::vector<int>& owned = dataset.labels_of_item(i);
    if (static_cast<int>(owned.size()) <= max_labels) continue;
    std::vector<int> order = owned;
    cap_rng.fork(dataset.item_ids()[i]).shuffle(order);
    for (size_t k = max_labels; k < order.size(); ++k) keep[order[k]] = false;
  }

  std::vector<LabelTriple> kept;
  kept.reserve(dataset.labels().size());
  for (size_t t = 0; t < dataset.labels().size(); ++t)
    if (keep[t]) kept.push_back(dataset.labels()[t]);

  std::optional<std::vector<int>> truth;
  if (dataset.has_truth()) truth = dataset.truth();
  return CrowdDataset::create(dataset.item_ids(), dataset.features(),
                              dataset.worker_ids(), dataset.class_names(),
                              std::move(kept), std::move(truth));
}

}  // namespace mmlc
