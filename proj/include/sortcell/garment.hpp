#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace sortcell {

// The six answer classes. `Empty` labels a scene with nothing on the table,
// never a physical item.
enum class GarmentClass { Shirt, Sock, Trousers, Underwear, Other, Empty };

inline constexpr std::array<GarmentClass, 6> kClassOrder = {
    GarmentClass::Shirt,  GarmentClass::Sock,  GarmentClass::Trousers,
    GarmentClass::Underwear, GarmentClass::Other, GarmentClass::Empty};

inline constexpr size_t kClassCount = kClassOrder.size();

constexpr std::string_view to_string(GarmentClass c) {
  switch (c) {
    case GarmentClass::Shirt: return "shirt";
    case GarmentClass::Sock: return "sock";
    case GarmentClass::Trousers: return "trousers";
    case GarmentClass::Underwear: return "underwear";
    case GarmentClass::Other: return "other";
    case GarmentClass::Empty: return "empty";
  }
  return "other";
}

constexpr size_t class_index(GarmentClass c) { return static_cast<size_t>(c); }

inline std::optional<GarmentClass> class_from_string(std::string_view s) {
  for (const GarmentClass c : kClassOrder) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

}  // namespace sortcell
