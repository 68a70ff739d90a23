#include "ggsd/eval.hpp"

#include <json.hpp>
#include <set>

#include "ggsd/error.hpp"
#include "ggsd/io.hpp"
#include "ggsd/linalg.hpp"
#include "ggsd/parallel.hpp"

namespace ggsd {

std::vector<int> infer_labels(const FeatureMatrix& features, const TextBank& bank, std::vector<std::size_t>* degenerate) {
  if (features.cols() != bank.dim()) throw_data("infer_labels: feature/bank dimension mismatch");
  if (bank.size() == 0) throw_data("infer_labels: empty bank");
  const FeatureMatrix text = l2_normalize_rows(bank.embeddings);
  std::vector<int> out(features.rows(), 0);
  parallel_for(features.rows(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto f = features.row(i);
      const double n = norm(f);
      if (n <= kNormEps) continue;
      int best = 0;
      double best_score = dot(f, text.row(0)) / n;
      for (std::size_t c = 1; c < text.rows(); ++c) {
        const double s = dot(f, text.row(c)) / n;
        if (s > best_score) {
          best_score = s;
          best = static_cast<int>(c);
        }
      }
      out[i] = best;
    }
  });
  if (degenerate) {
    degenerate->clear();
    for (std::size_t i = 0; i < features.rows(); ++i)
      if (norm(features.row(i)) <= kNormEps) degenerate->push_back(i);
  }
  return out;
}

std::vector<std::string> MultiNameMap::fine_names_from_json(const std::string& text) {
  std::vector<std::string> out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& cls : j.at("classes"))
      for (const auto& n : cls.at("names")) out.push_back(n.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("multi-name map: ") + e.what());
  }
  return out;
}

MultiNameMap MultiNameMap::from_json(const std::string& text, const TextBank& extended_bank) {
  MultiNameMap map;
  map.name_to_class.assign(extended_bank.size(), -1);
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& cls : j.at("classes")) {
      const int id = static_cast<int>(map.benchmark_classes.size());
      map.benchmark_classes.push_back(cls.at("name").get<std::string>());
      for (const auto& n : cls.at("names")) {
        const std::string name = n.get<std::string>();
        const auto it = std::find(extended_bank.class_names.begin(), extended_bank.class_names.end(), name);
        if (it == extended_bank.class_names.end())
          throw_data("multi-name map: '" + name + "' is not in the extended bank");
        const auto row = static_cast<std::size_t>(it - extended_bank.class_names.begin());
        if (map.name_to_class[row] >= 0) throw_data("multi-name map: '" + name + "' maps to two classes");
        map.name_to_class[row] = id;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("multi-name map: ") + e.what());
  }
  return map;
}

MultiNameMap MultiNameMap::load(const std::filesystem::path& path, const TextBank& extended_bank) {
  return from_json(read_text(path), extended_bank);
}

std::vector<int> infer_multiname(const FeatureMatrix& features, const TextBank& extended_bank, const MultiNameMap& map) {
  if (map.name_to_class.size() != extended_bank.size()) throw_data("infer_multiname: map does not match the bank");
  std::vector<int> fine = infer_labels(features, extended_bank);
  for (int& id : fine) {
    const int mapped = map.name_to_class[static_cast<std::size_t>(id)];
    if (mapped < 0) throw_data("infer_multiname: extended name '" + extended_bank.class_names[id] + "' is unmapped");
    id = mapped;
  }
  return fine;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes != num_classes) throw_data("confusion merge: class count mismatch");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
  ignored += other.ignored;
}

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t num_classes) {
  if (pred.size() != gt.size()) throw_data("confusion: prediction/ground-truth size mismatch");
  ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0), 0};
  const int l = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] < -1 || gt[i] >= l) throw_data("confusion: ground-truth id " + std::to_string(gt[i]) + " out of range");
    if (gt[i] == -1) {
      ++cm.ignored;
      continue;
    }
    if (pred[i] < 0 || pred[i] >= l) throw_data("confusion: predicted id " + std::to_string(pred[i]) + " out of range");
    ++cm.counts[static_cast<std::size_t>(gt[i]) * num_classes + static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

SegMetrics miou_macc(const ConfusionMatrix& cm) {
  const std::size_t l = cm.num_classes;
  SegMetrics m;
  m.iou.assign(l, 0.0);
  m.acc.assign(l, 0.0);
  m.iou_valid.assign(l, false);
  m.acc_valid.assign(l, false);
  double iou_sum = 0, acc_sum = 0;
  std::size_t iou_n = 0, acc_n = 0;
  for (std::size_t c = 0; c < l; ++c) {
    std::uint64_t gt = 0, pred = 0;
    for (std::size_t k = 0; k < l; ++k) {
      gt += cm.at(c, k);
      pred += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    if (gt + pred == 0) continue;
    m.iou[c] = static_cast<double>(tp) / static_cast<double>(gt + pred - tp);
    m.iou_valid[c] = true;
    iou_sum += m.iou[c];
    ++iou_n;
    if (gt > 0) {
      m.acc[c] = static_cast<double>(tp) / static_cast<double>(gt);
      m.acc_valid[c] = true;
      acc_sum += m.acc[c];
      ++acc_n;
    }
  }
  if (iou_n == 0 || acc_n == 0) throw_data("miou_macc: no class present in the confusion matrix");
  m.miou = iou_sum / static_cast<double>(iou_n);
  m.macc = acc_sum / static_cast<double>(acc_n);
  return m;
}

void ClassPartition::validate(std::size_t num_classes) const {
  std::set<int> seen;
  for (const auto& [name, ids] : groups) {
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= num_classes)
        throw_data("partition group '" + name + "': class id " + std::to_string(id) + " out of range");
      if (!seen.insert(id).second) throw_data("partition groups overlap on class id " + std::to_string(id));
    }
  }
}

ClassPartition ClassPartition::from_json(const std::string& text, const TextBank& bank) {
  ClassPartition p;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& groups = j.contains("groups") ? j.at("groups") : j;
    for (const auto& [name, members] : groups.items()) {
      std::vector<int> ids;
      for (const auto& m : members) {
        if (m.is_number_integer()) {
          ids.push_back(m.get<int>());
          continue;
        }
        const std::string cls = m.get<std::string>();
        const auto it = std::find(bank.class_names.begin(), bank.class_names.end(), cls);
        if (it == bank.class_names.end()) throw_data("partition group '" + name + "': unknown class '" + cls + "'");
        ids.push_back(static_cast<int>(it - bank.class_names.begin()));
      }
      p.groups.emplace_back(name, std::move(ids));
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("partition: ") + e.what());
  }
  // nlohmann orders object keys alphabetically; keep the conventional order when present.
  const std::vector<std::string> order = {"Head", "Common", "Tail"};
  std::stable_sort(p.groups.begin(), p.groups.end(), [&](const auto& a, const auto& b) {
    const auto ia = std::find(order.begin(), order.end(), a.first) - order.begin();
    const auto ib = std::find(order.begin(), order.end(), b.first) - order.begin();
    return ia < ib;
  });
  p.validate(bank.size());
  return p;
}

ClassPartition ClassPartition::load(const std::filesystem::path& path, const TextBank& bank) {
  return from_json(read_text(path), bank);
}

std::vector<GroupMetrics> partition_report(const ConfusionMatrix& cm, const ClassPartition& partition) {
  partition.validate(cm.num_classes);
  const SegMetrics all = miou_macc(cm);
  std::vector<GroupMetrics> out;
  for (const auto& [name, ids] : partition.groups) {
    double iou = 0, acc = 0;
    std::size_t ni = 0, na = 0;
    for (int id : ids) {
      if (all.iou_valid[id]) {
        iou += all.iou[id];
        ++ni;
      }
      if (all.acc_valid[id]) {
        acc += all.acc[id];
        ++na;
      }
    }
    if (ni == 0 || na == 0) throw_data("partition group '" + name + "' has no class present");
    out.push_back({name, iou / static_cast<double>(ni), acc / static_cast<double>(na)});
  }
  return out;
}

}  // namespace ggsd
