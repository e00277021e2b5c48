#include "sortcell/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sortcell/rng.hpp"

namespace sortcell::cellsim {

using nlohmann::json;

double Item::volume() const {
  double v = 0;
  for (const double h : height_mm) v += h;
  return v;
}

double Item::mean_height() const {
  return cells.empty() ? 0.0 : volume() / static_cast<double>(cells.size());
}

void Item::centroid_cells(double& x, double& y) const {
  double sx = 0, sy = 0;
  for (const GridCell& c : cells) {
    sx += c.x;
    sy += c.y;
  }
  const double n = cells.empty() ? 1.0 : static_cast<double>(cells.size());
  x = sx / n;
  y = sy / n;
}

void Item::translate(int dx_cells, int dy_cells) {
  for (GridCell& c : cells) {
    c.x += dx_cells;
    c.y += dy_cells;
  }
}

int SceneSpec::total_items() const {
  int n = foreign_count;
  for (const auto& [cls, count] : counts) n += count;
  return n;
}

const Item* WorldState::find_item(const std::string& id) const {
  for (const Item& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

Item* WorldState::find_item(const std::string& id) {
  for (Item& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

const Item& WorldState::item_or_throw(const std::string& id) const {
  const Item* it = find_item(id);
  if (!it) throw std::invalid_argument("unknown item id: " + id);
  return *it;
}

std::vector<std::string> WorldState::items_in(const std::string& location) const {
  std::vector<std::string> out;
  for (const Item& it : items) {
    const auto found = item_location.find(it.id);
    if (found != item_location.end() && found->second == location)
      out.push_back(it.id);
  }
  return out;
}

CellLayout CellLayout::standard() {
  CellLayout l;
  Zone a{ZoneId::A, {0, 0, 600, 500}, {}};
  Zone b{ZoneId::B, {700, 0, 1300, 500}, {}};
  Zone c{ZoneId::C, {1400, 0, 2000, 500}, {}};
  // 3x2 bin grid inside zone C, canonical class order
  const double bw = (c.rect_world.x1 - c.rect_world.x0) / 3.0;
  const double bh = (c.rect_world.y1 - c.rect_world.y0) / 2.0;
  for (size_t i = 0; i < kClassOrder.size(); ++i) {
    const double bx = c.rect_world.x0 + bw * static_cast<double>(i % 3);
    const double by = c.rect_world.y0 + bh * static_cast<double>(i / 3);
    c.bins[kClassOrder[i]] = {bx + 5, by + 5, bx + bw - 5, by + bh - 5};
  }
  l.zones = {{ZoneId::A, a}, {ZoneId::B, b}, {ZoneId::C, c}};
  l.basket_rect_world = {100, 50, 500, 450};
  l.cameras[CameraId::Cam1] =
      CameraModel::top_down(CameraId::Cam1, 300, 250, 800, 580, 580, 640, 480);
  l.cameras[CameraId::Cam2] =
      CameraModel::top_down(CameraId::Cam2, 1000, 250, 800, 580, 580, 640, 480);
  return l;
}

namespace {

struct SizeRange {
  double w_lo, w_hi, h_lo, h_hi;        // footprint extent, mm
  double tall_lo, tall_hi;              // pile height, mm
  double thick_lo, thick_hi;            // graspable thickness, mm
};

SizeRange size_range(GarmentClass cls, bool foreign) {
  if (foreign) return {40, 90, 40, 120, 50, 110, 6, 20};
  switch (cls) {
    case GarmentClass::Shirt: return {180, 260, 200, 300, 18, 35, 3, 6};
    case GarmentClass::Sock: return {50, 80, 90, 140, 12, 25, 3, 8};
    case GarmentClass::Trousers: return {150, 220, 240, 340, 18, 35, 3, 7};
    case GarmentClass::Underwear: return {100, 150, 100, 160, 8, 18, 2.5, 5};
    default: return {80, 200, 80, 200, 12, 30, 2.5, 8};
  }
}

Rgb8 draw_item_color(RngStream& rng, const CellLayout& layout) {
  for (;;) {
    const Rgb8 c{static_cast<uint8_t>(rng.uniform_int(0, 255)),
                 static_cast<uint8_t>(rng.uniform_int(0, 255)),
                 static_cast<uint8_t>(rng.uniform_int(0, 255))};
    const Rgb8 t = layout.table_color;
    const int dr = std::abs(int(c.r) - int(t.r));
    const int dg = std::abs(int(c.g) - int(t.g));
    const int db = std::abs(int(c.b) - int(t.b));
    if (std::max({dr, dg, db}) <= 15) continue;  // segmentation must see it
    if (c == layout.basket_rim_color) continue;  // reserved key
    return c;
  }
}

Item make_item(const std::string& id, GarmentClass cls, bool foreign,
               RngStream& rng, const CellLayout& layout) {
  const SizeRange r = size_range(cls, foreign);
  const int w = std::max(1, static_cast<int>(std::round(
                                rng.uniform_range(r.w_lo, r.w_hi) / kCellSizeMm)));
  const int h = std::max(1, static_cast<int>(std::round(
                                rng.uniform_range(r.h_lo, r.h_hi) / kCellSizeMm)));
  const double tall = rng.uniform_range(r.tall_lo, r.tall_hi);
  const Rgb8 color = draw_item_color(rng, layout);

  Item item;
  item.id = id;
  item.true_class = cls;
  item.foreign = foreign;
  item.thickness_mm = rng.uniform_range(r.thick_lo, r.thick_hi);
  item.cells.reserve(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) item.cells.push_back({x, y});
  item.height_mm.assign(item.cells.size(), tall);
  item.color_rgb.assign(item.cells.size(), color);
  return item;
}

void place_in_rect(Item& item, const RectMM& rect, RngStream& rng) {
  int min_x = item.cells[0].x, max_x = min_x, min_y = item.cells[0].y, max_y = min_y;
  for (const GridCell& c : item.cells) {
    min_x = std::min(min_x, c.x);
    max_x = std::max(max_x, c.x);
    min_y = std::min(min_y, c.y);
    max_y = std::max(max_y, c.y);
  }
  const int w = max_x - min_x + 1, h = max_y - min_y + 1;
  const int rx0 = to_cell(rect.x0) + 1, ry0 = to_cell(rect.y0) + 1;
  const int rx1 = to_cell(rect.x1) - 1, ry1 = to_cell(rect.y1) - 1;
  const int span_x = std::max(0, (rx1 - rx0) - w);
  const int span_y = std::max(0, (ry1 - ry0) - h);
  const int ox = rx0 + rng.uniform_int(0, span_x);
  const int oy = ry0 + rng.uniform_int(0, span_y);
  item.translate(ox - min_x, oy - min_y);
}

}  // namespace

WorldState spawn_scene(const SceneSpec& spec, uint64_t seed,
                       const CellLayout& layout) {
  for (const auto& [cls, count] : spec.counts) {
    if (count < 0) throw std::invalid_argument("negative class count");
    if (cls == GarmentClass::Empty && count > 0)
      throw std::invalid_argument("`empty` is a scene label, not an item class");
  }
  if (spec.foreign_count < 0) throw std::invalid_argument("negative foreign count");
  if (spec.entangle_p < 0 || spec.entangle_p > 1)
    throw std::invalid_argument("entangle_p outside [0,1]");

  WorldState world;
  world.layout = layout;
  world.rng_seed = seed;
  world.tick = 0;

  RngStream rng = RngStream(seed).split("spawn");

  int serial = 0;
  const auto next_id = [&serial] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "item%02d", serial++);
    return std::string(buf);
  };

  // Deterministic spawn order: canonical class order, then foreign objects.
  for (const GarmentClass cls : kClassOrder) {
    const auto found = spec.counts.find(cls);
    const int count = found == spec.counts.end() ? 0 : found->second;
    for (int i = 0; i < count; ++i)
      world.items.push_back(make_item(next_id(), cls, false, rng, layout));
  }
  for (int i = 0; i < spec.foreign_count; ++i)
    world.items.push_back(
        make_item(next_id(), GarmentClass::Other, true, rng, layout));

  // Capacity gate before any placement.
  double total_area_mm2 = 0;
  for (const Item& it : world.items)
    total_area_mm2 += static_cast<double>(it.area_cells()) * kCellSizeMm * kCellSizeMm;
  const double capacity =
      layout.basket_rect_world.area() * layout.stacking_factor;
  if (total_area_mm2 > capacity) {
    std::ostringstream msg;
    msg << "basket capacity exceeded: footprint area " << total_area_mm2
        << " mm^2 > " << capacity << " mm^2 (basket area x stacking factor)";
    throw std::invalid_argument(msg.str());
  }

  for (Item& it : world.items) {
    place_in_rect(it, layout.basket_rect_world, rng);
    world.item_location[it.id] = "A";
  }

  // Stacking order: insertion order shuffled by the seed; last entry is on top.
  for (const Item& it : world.items) world.stacking.push_back(it.id);
  rng.shuffle(world.stacking);

  // Entanglement: shuffle, pair adjacent, link per probability (or exactly
  // the first k pairs when an explicit pair count is given).
  std::vector<std::string> order;
  for (const Item& it : world.items) order.push_back(it.id);
  rng.shuffle(order);
  const size_t max_pairs = order.size() / 2;
  size_t linked = 0;
  for (size_t p = 0; p < max_pairs; ++p) {
    bool link;
    if (spec.entangled_pairs.has_value()) {
      link = linked < static_cast<size_t>(*spec.entangled_pairs);
    } else {
      link = rng.uniform01() < spec.entangle_p;
    }
    if (!link) continue;
    Item* a = world.find_item(order[2 * p]);
    Item* b = world.find_item(order[2 * p + 1]);
    a->entangled_with = b->id;
    b->entangled_with = a->id;
    ++linked;
  }
  if (spec.entangled_pairs.has_value() &&
      linked < static_cast<size_t>(*spec.entangled_pairs))
    throw std::invalid_argument("not enough items for requested entangled pairs");

  return world;
}

WorldState move_item(WorldState world, const std::string& item_id,
                     const Placement& dest) {
  Item* item = world.find_item(item_id);
  if (!item) throw std::invalid_argument("unknown item id: " + item_id);
  const auto zone_it = world.layout.zones.find(dest.zone);
  if (zone_it == world.layout.zones.end())
    throw std::invalid_argument("unknown destination zone");

  RectMM target = zone_it->second.rect_world;
  if (dest.bin.has_value()) {
    const auto bin_it = zone_it->second.bins.find(*dest.bin);
    if (bin_it == zone_it->second.bins.end())
      throw std::invalid_argument("destination zone has no such bin");
    target = bin_it->second;
  }

  double cx_cells, cy_cells;
  item->centroid_cells(cx_cells, cy_cells);
  double want_x = dest.x_mm.value_or(target.cx());
  double want_y = dest.y_mm.value_or(target.cy());

  // Keep the footprint inside the target rectangle.
  int min_x = item->cells[0].x, max_x = min_x, min_y = item->cells[0].y, max_y = min_y;
  for (const GridCell& c : item->cells) {
    min_x = std::min(min_x, c.x);
    max_x = std::max(max_x, c.x);
    min_y = std::min(min_y, c.y);
    max_y = std::max(max_y, c.y);
  }
  const double half_w = (max_x - min_x + 1) * kCellSizeMm * 0.5;
  const double half_h = (max_y - min_y + 1) * kCellSizeMm * 0.5;
  want_x = std::clamp(want_x, target.x0 + half_w, target.x1 - half_w);
  want_y = std::clamp(want_y, target.y0 + half_h, target.y1 - half_h);

  const int dx = to_cell(want_x) - static_cast<int>(std::round(cx_cells));
  const int dy = to_cell(want_y) - static_cast<int>(std::round(cy_cells));
  item->translate(dx, dy);

  world.item_location[item_id] = to_string(dest.zone);
  auto& stack = world.stacking;
  stack.erase(std::remove(stack.begin(), stack.end(), item_id), stack.end());
  stack.push_back(item_id);
  world.tick += 1;
  return world;
}

WorldState set_location(WorldState world, const std::string& item_id,
                        const std::string& location) {
  if (!world.find_item(item_id))
    throw std::invalid_argument("unknown item id: " + item_id);
  world.item_location[item_id] = location;
  world.tick += 1;
  return world;
}

namespace {

json rect_to_json(const RectMM& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

RectMM rect_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

}  // namespace

std::string world_to_json(const WorldState& world) {
  json j;
  j["seed"] = world.rng_seed;
  j["tick"] = world.tick;
  j["basket_rect"] = rect_to_json(world.layout.basket_rect_world);

  json zones = json::array();
  for (const auto& [id, zone] : world.layout.zones) {
    json z;
    z["id"] = to_string(id);
    z["rect"] = rect_to_json(zone.rect_world);
    if (!zone.bins.empty()) {
      json bins;
      for (const auto& [cls, rect] : zone.bins)
        bins[std::string(to_string(cls))] = rect_to_json(rect);
      z["bins"] = bins;
    }
    zones.push_back(z);
  }
  j["zones"] = zones;

  json items = json::array();
  for (const Item& it : world.items) {
    json ji;
    ji["id"] = it.id;
    ji["class"] = std::string(to_string(it.true_class));
    ji["foreign"] = it.foreign;
    ji["thickness_mm"] = it.thickness_mm;
    ji["location"] = world.item_location.at(it.id);
    if (it.entangled_with) ji["entangled_with"] = *it.entangled_with;
    json cells = json::array();
    for (size_t k = 0; k < it.cells.size(); ++k)
      cells.push_back(json::array({it.cells[k].x, it.cells[k].y, it.height_mm[k],
                                   it.color_rgb[k].r, it.color_rgb[k].g,
                                   it.color_rgb[k].b}));
    ji["cells"] = cells;
    items.push_back(ji);
  }
  j["items"] = items;

  json stacking = json::array();
  for (const std::string& id : world.stacking) stacking.push_back(id);
  j["stacking"] = stacking;
  return j.dump();
}

WorldState world_from_json(const std::string& text) {
  const json j = json::parse(text);
  WorldState world;
  world.layout = CellLayout::standard();
  world.rng_seed = j.at("seed").get<uint64_t>();
  world.tick = j.at("tick").get<int64_t>();
  world.layout.basket_rect_world = rect_from_json(j.at("basket_rect"));

  world.layout.zones.clear();
  for (const json& z : j.at("zones")) {
    Zone zone;
    const std::string id = z.at("id").get<std::string>();
    zone.id = id == "A" ? ZoneId::A : id == "B" ? ZoneId::B : ZoneId::C;
    zone.rect_world = rect_from_json(z.at("rect"));
    if (z.contains("bins")) {
      for (const auto& [name, rect] : z.at("bins").items()) {
        const auto cls = class_from_string(name);
        if (cls) zone.bins[*cls] = rect_from_json(rect);
      }
    }
    world.layout.zones[zone.id] = zone;
  }

  for (const json& ji : j.at("items")) {
    Item it;
    it.id = ji.at("id").get<std::string>();
    it.true_class = class_from_string(ji.at("class").get<std::string>())
                        .value_or(GarmentClass::Other);
    it.foreign = ji.value("foreign", false);
    it.thickness_mm = ji.at("thickness_mm").get<double>();
    if (ji.contains("entangled_with"))
      it.entangled_with = ji.at("entangled_with").get<std::string>();
    for (const json& c : ji.at("cells")) {
      it.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
      it.height_mm.push_back(c.at(2).get<double>());
      it.color_rgb.push_back({c.at(3).get<uint8_t>(), c.at(4).get<uint8_t>(),
                              c.at(5).get<uint8_t>()});
    }
    world.item_location[it.id] = ji.at("location").get<std::string>();
    world.items.push_back(std::move(it));
  }

  for (const json& id : j.at("stacking"))
    world.stacking.push_back(id.get<std::string>());
  return world;
}

}  // namespace sortcell::cellsim
