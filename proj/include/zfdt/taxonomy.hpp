#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace zfdt {

/// The seven fine-grained information categories of a formula record, in the
/// fixed taxonomy order (Diseases first, Preparation Methods last), plus
/// `unknown` for entities the extractor could not label.
enum class Category : int {
    disease = 0,
    formula = 1,
    herbal_ingredient = 2,
    symptoms_population = 3,
    pulse_tongue = 4,
    contraindication = 5,
    preparation = 6,
    unknown = 7,
};

inline constexpr std::size_t kCategoryCount = 7;

inline constexpr std::array<Category, kCategoryCount> kCategories = {
    Category::disease,          Category::formula,      Category::herbal_ingredient,
    Category::symptoms_population, Category::pulse_tongue, Category::contraindication,
    Category::preparation,
};

constexpr int category_rank(Category c) { return static_cast<int>(c); }

/// Stable snake-case identifier used in files and JSON.
std::string_view category_id(Category c);

/// Section header title, e.g. "Herbal Ingredients".
std::string_view category_title(Category c);

std::optional<Category> parse_category_id(std::string_view id);

/// Maps a section header title (or a known alias such as "Herbal Components"
/// or "Processing Methods") to its category. Case-insensitive.
std::optional<Category> category_from_title(std::string_view title);

/// Herb roles in a formula's composition hierarchy.
enum class HerbRole { sovereign, minister, assistant, courier, unassigned };

std::string_view herb_role_id(HerbRole r);
std::optional<HerbRole> parse_herb_role(std::string_view word);

}  // namespace zfdt
