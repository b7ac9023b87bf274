#include "swidernet/panoptic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace swidernet {

namespace {

using SegKey = std::uint32_t;  // (class << 16) | instance

SegKey seg_key(std::uint16_t cls, std::uint16_t inst) {
  return (static_cast<SegKey>(cls) << 16) | inst;
}
std::uint16_t seg_class(SegKey k) { return static_cast<std::uint16_t>(k >> 16); }

}  // namespace

std::optional<std::string> validate_map(const PanopticMap& map,
                                        const CategoryMeta& meta) {
  if (map.class_id.size() != map.size() || map.instance_id.size() != map.size())
    return "label buffers do not match width*height";
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::uint16_t cls = map.class_id[i];
    const std::uint16_t inst = map.instance_id[i];
    if (cls == kVoidClass) {
      if (inst != 0) return "VOID pixel with nonzero instance id";
      continue;
    }
    if (meta.isthing.find(cls) == meta.isthing.end())
      return "pixel with unknown class id " + std::to_string(cls);
    if (meta.thing(cls)) {
      if (inst == 0) return "thing pixel with instance id 0";
    } else if (inst != 0) {
      return "stuff pixel with nonzero instance id";
    }
  }
  return std::nullopt;
}

std::vector<std::uint16_t> group_instances(const Tensor& center,
                                           const Tensor& offsets,
                                           const std::vector<std::uint8_t>& thing_mask,
                                           const GroupParams& params) {
  if (center.n != 1 || center.c != 1)
    throw std::invalid_argument("group_instances: heatmap must be (1,1,h,w)");
  if (offsets.n != 1 || offsets.c != 2 || offsets.h != center.h ||
      offsets.w != center.w)
    throw std::invalid_argument("group_instances: offsets must be (1,2,h,w)");
  const int h = center.h, w = center.w;
  if (static_cast<int>(thing_mask.size()) != h * w)
    throw std::invalid_argument("group_instances: mask size mismatch");

  // window NMS: a pixel is a center iff it equals the window max and clears
  // the threshold
  struct Center {
    float score;
    int y, x;
  };
  std::vector<Center> centers;
  const int half = params.nms_window / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = center.at(0, 0, y, x);
      if (v < static_cast<float>(params.center_threshold)) continue;
      float m = v;
      for (int dy = -half; dy <= half; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -half; dx <= half; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          m = std::max(m, center.at(0, 0, yy, xx));
        }
      }
      if (v == m) centers.push_back({v, y, x});
    }
  std::stable_sort(centers.begin(), centers.end(), [](const Center& a, const Center& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(centers.size()) > params.top_k)
    centers.resize(params.top_k);

  std::vector<std::uint16_t> ids(static_cast<std::size_t>(h) * w, 0);
  if (centers.empty()) return ids;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!thing_mask[static_cast<std::size_t>(y) * w + x]) continue;
      const double ty = y + offsets.at(0, 0, y, x);
      const double tx = x + offsets.at(0, 1, y, x);
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const double dy = ty - centers[ci].y;
        const double dx = tx - centers[ci].x;
        const double d2 = dy * dy + dx * dx;
        if (d2 < best_d2) {
          best_d2 = d2;
          best = static_cast<int>(ci);
        }
      }
      ids[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint16_t>(best + 1);
    }
  return ids;
}

PanopticMap fuse(const std::vector<std::uint16_t>& semantic,
                 const std::vector<std::uint16_t>& instance_ids, int height,
                 int width, const CategoryMeta& meta) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (semantic.size() != n || instance_ids.size() != n)
    throw std::invalid_argument("fuse: size mismatch");

  // majority semantic vote per instance, ties to the smaller class id
  std::map<std::uint16_t, std::map<std::uint16_t, long long>> votes;
  for (std::size_t i = 0; i < n; ++i) {
    if (instance_ids[i] == 0) continue;
    if (meta.isthing.find(semantic[i]) == meta.isthing.end())
      throw std::invalid_argument("fuse: unknown class id " +
                                  std::to_string(semantic[i]));
    votes[instance_ids[i]][semantic[i]]++;
  }
  std::map<std::uint16_t, std::uint16_t> instance_class;
  for (const auto& [inst, tally] : votes) {
    std::uint16_t best_cls = 0;
    long long best_count = -1;
    for (const auto& [cls, count] : tally)
      if (count > best_count) {  // map iterates ascending: ties keep smaller id
        best_count = count;
        best_cls = cls;
      }
    instance_class[inst] = best_cls;
  }

  PanopticMap out(height, width);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t sem = semantic[i];
    if (meta.isthing.find(sem) == meta.isthing.end())
      throw std::invalid_argument("fuse: unknown class id " + std::to_string(sem));
    const std::uint16_t inst = instance_ids[i];
    if (inst != 0) {
      const std::uint16_t cls = instance_class.at(inst);
      if (meta.thing(cls)) {
        out.class_id[i] = cls;
        out.instance_id[i] = inst;
      } else {
        // the vote landed on a stuff class: the pixels join that stuff segment
        out.class_id[i] = cls;
        out.instance_id[i] = 0;
      }
    } else if (meta.thing(sem)) {
      out.class_id[i] = kVoidClass;  // predicted thing but no instance
    } else {
      out.class_id[i] = sem;
    }
  }
  return out;
}

PanopticMap stuff_area_filter(const PanopticMap& map, const CategoryMeta& meta,
                              long long threshold) {
  if (threshold < 0)
    throw std::invalid_argument("stuff_area_filter: threshold must be >= 0");
  std::map<std::uint16_t, long long> stuff_area;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::uint16_t cls = map.class_id[i];
    if (cls == kVoidClass || meta.thing(cls)) continue;
    stuff_area[cls]++;
  }
  PanopticMap out = map;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::uint16_t cls = map.class_id[i];
    if (cls == kVoidClass || meta.thing(cls)) continue;
    if (stuff_area[cls] < threshold) {
      out.class_id[i] = kVoidClass;
      out.instance_id[i] = 0;
    }
  }
  return out;
}

PQResult pq(const PanopticMap& pred, const PanopticMap& gt,
            const CategoryMeta& meta) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("pq: size mismatch");

  std::map<SegKey, long long> pred_area, gt_area;
  std::map<std::pair<SegKey, SegKey>, long long> inter;  // (pred, gt) incl VOID gt
  std::map<SegKey, long long> pred_void_overlap;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool pv = pred.class_id[i] == kVoidClass;
    const bool gv = gt.class_id[i] == kVoidClass;
    const SegKey pk = seg_key(pred.class_id[i], pred.instance_id[i]);
    const SegKey gk = seg_key(gt.class_id[i], gt.instance_id[i]);
    if (!pv) pred_area[pk]++;
    if (!gv) gt_area[gk]++;
    if (!pv && !gv) inter[{pk, gk}]++;
    if (!pv && gv) pred_void_overlap[pk]++;
  }

  std::map<SegKey, SegKey> matched_pred;  // pred -> gt
  std::map<SegKey, double> matched_iou;
  std::map<SegKey, bool> gt_matched;
  for (const auto& [keys, count] : inter) {
    const auto& [pk, gk] = keys;
    if (seg_class(pk) != seg_class(gk)) continue;
    const long long uni =
        pred_area[pk] + gt_area[gk] - count - pred_void_overlap[pk];
    const double iou = uni > 0 ? static_cast<double>(count) / uni : 0.0;
    if (iou > 0.5) {
      matched_pred[pk] = gk;
      matched_iou[pk] = iou;
      gt_matched[gk] = true;
    }
  }

  PQResult result;
  for (const auto& [gk, area] : gt_area)
    result.per_class[seg_class(gk)];  // classes present in GT
  for (const auto& [pk, gk] : matched_pred) {
    ClassPQ& c = result.per_class[seg_class(pk)];
    c.tp++;
    c.iou_sum += matched_iou[pk];
  }
  for (const auto& [gk, area] : gt_area)
    if (!gt_matched.count(gk)) result.per_class[seg_class(gk)].fn++;
  for (const auto& [pk, area] : pred_area) {
    if (matched_pred.count(pk)) continue;
    // mostly over GT VOID: not a false positive
    if (pred_void_overlap.count(pk) &&
        pred_void_overlap[pk] * 2 > pred_area[pk])
      continue;
    auto it = result.per_class.find(seg_class(pk));
    if (it != result.per_class.end()) it->second.fp++;
  }

  double sum_pq = 0, sum_pq_things = 0, sum_pq_stuff = 0;
  for (auto& [cls, c] : result.per_class) {
    const double denom = c.tp + 0.5 * c.fp + 0.5 * c.fn;
    c.pq = denom > 0 ? c.iou_sum / denom : 0.0;
    c.sq = c.tp > 0 ? c.iou_sum / c.tp : 0.0;
    c.rq = denom > 0 ? c.tp / denom : 0.0;
    sum_pq += c.pq;
    result.n_classes++;
    if (meta.thing(cls)) {
      sum_pq_things += c.pq;
      result.n_things++;
    } else {
      sum_pq_stuff += c.pq;
      result.n_stuff++;
    }
  }
  result.pq = result.n_classes ? sum_pq / result.n_classes : 0.0;
  result.pq_things = result.n_things ? sum_pq_things / result.n_things : 0.0;
  result.pq_stuff = result.n_stuff ? sum_pq_stuff / result.n_stuff : 0.0;
  return result;
}

MiouResult miou(const std::vector<std::uint16_t>& pred,
                const std::vector<std::uint16_t>& gt, int height, int width) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (pred.size() != n || gt.size() != n)
    throw std::invalid_argument("miou: size mismatch");
  std::map<std::uint16_t, long long> inter, pred_count, gt_count;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt[i] == kVoidClass) continue;  // GT VOID excluded
    gt_count[gt[i]]++;
    pred_count[pred[i]]++;
    if (pred[i] == gt[i]) inter[gt[i]]++;
  }
  MiouResult result;
  double sum = 0;
  for (const auto& [cls, gc] : gt_count) {
    const long long un = gc + pred_count[cls] - inter[cls];
    const double iou = un > 0 ? static_cast<double>(inter[cls]) / un : 0.0;
    result.per_class[cls] = iou;
    sum += iou;
  }
  result.mean = gt_count.empty() ? 0.0 : sum / gt_count.size();
  return result;
}

void save_panoptic_file(const PanopticMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write panoptic file: " + path);
  out.write("PAN1", 4);
  auto write_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  write_u32(static_cast<std::uint32_t>(map.height));
  write_u32(static_cast<std::uint32_t>(map.width));
  for (std::size_t i = 0; i < map.size(); ++i) {
    unsigned char b[4] = {static_cast<unsigned char>(map.class_id[i] & 0xff),
                          static_cast<unsigned char>(map.class_id[i] >> 8),
                          static_cast<unsigned char>(map.instance_id[i] & 0xff),
                          static_cast<unsigned char>(map.instance_id[i] >> 8)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

PanopticMap load_panoptic_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open panoptic file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PAN1", 4) != 0)
    throw std::runtime_error("bad panoptic file magic in " + path);
  auto read_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  };
  const std::uint32_t h = read_u32();
  const std::uint32_t w = read_u32();
  if (!in) throw std::runtime_error("truncated panoptic file: " + path);
  PanopticMap map(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < map.size(); ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated panoptic file: " + path);
    map.class_id[i] = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    map.instance_id[i] = static_cast<std::uint16_t>(b[2] | (b[3] << 8));
  }
  return map;
}

CategoryMeta load_meta_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metadata file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed metadata JSON in " + path + ": " + e.what());
  }
  CategoryMeta meta;
  for (const auto& entry : j) {
    const auto cls = entry.at("class_id").get<std::uint16_t>();
    meta.isthing[cls] = entry.at("isthing").get<bool>();
    if (entry.contains("name")) meta.names[cls] = entry["name"].get<std::string>();
  }
  return meta;
}

void save_meta_file(const CategoryMeta& meta, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [cls, thing] : meta.isthing) {
    nlohmann::json e = {{"class_id", cls}, {"isthing", thing}};
    auto it = meta.names.find(cls);
    if (it != meta.names.end()) e["name"] = it->second;
    j.push_back(e);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metadata file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace swidernet
