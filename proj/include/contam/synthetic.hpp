#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "contam/date.hpp"
#include "contam/rng.hpp"
#include "contam/text.hpp"

// Seeded stochastic template grammar that produces encyclopedia-style
// articles. Used to run the detection protocol end to end against an n-gram
// oracle whose training corpus is fully known.
namespace contam::synthetic {

struct Article {
  std::string title;
  std::string text;
  std::string question;
  std::string answer;
};

namespace lists {
inline constexpr std::array<std::string_view, 40> kGiven{
    "Amara",  "Bastien", "Corinna", "Dario",   "Elsbeth", "Farid",   "Greta",  "Hollis",  "Ilse",   "Joaquin",
    "Kalani", "Leopold", "Mirela",  "Nandor",  "Odile",   "Pavel",   "Quilla", "Rosalind", "Soren", "Tamsin",
    "Ulrich", "Vesna",   "Wendell", "Ximena",  "Yannick", "Zofia",   "Anselm", "Brisa",   "Caspian", "Delphine",
    "Emeric", "Fenna",   "Gideon",  "Halina",  "Isidore", "Jorunn",  "Kasimir", "Lucine", "Matthias", "Noor"};
inline constexpr std::array<std::string_view, 40> kFamily{
    "Abernathy", "Brandt",   "Castellanos", "Dunmore",  "Eriksen",  "Falkenrath", "Galloway", "Hargreaves",
    "Ishikawa",  "Jankowski", "Kowalczyk",  "Lindqvist", "Marchetti", "Nakashima", "Oyelaran", "Pemberton",
    "Quintero",  "Rasmussen", "Sandoval",   "Thackeray", "Underhill", "Valcourt",  "Whitcombe", "Yilmaz",
    "Zeller",    "Ashdown",  "Beaumont",    "Carrow",   "Dimitrov", "Escobedo",   "Fairbanks", "Grünewald",
    "Holloway",  "Ivanova",  "Jovanovic",   "Kettering", "Lachance", "Montague",   "Novak",     "Okafor"};
inline constexpr std::array<std::string_view, 40> kPlace{
    "Varnholm",  "Ostercliff", "Merrowdale", "Kestrel Bay", "Ashgrove",  "Tullamore", "Pelinor",  "Drumcastle",
    "Silverbrook", "Halvik",   "Corramine",  "Brindlemere", "Eskerfield", "Wolvenport", "Lanthorne", "Ravensmoor",
    "Quarrington", "Fennick",  "Glimmerton", "Stonereach", "Marlowe Cross", "Thistlewick", "Orrin Falls", "Celandine",
    "Harrowgate", "Innisfree", "Jorvale",    "Kilbraddan", "Lowmarsh",  "Mossford",  "Northwend", "Pyrefield",
    "Redwater",  "Saltmere",   "Tarnbrook",  "Umberleigh", "Vexley",    "Wyrmstead", "Yarrowby",  "Zennor"};
inline constexpr std::array<std::string_view, 36> kField{
    "astronomy",  "botany",   "cartography", "linguistics", "metallurgy", "choral music", "hydrology", "typography",
    "ornithology", "glassmaking", "seismology", "bookbinding", "numismatics", "oceanography", "mycology", "clockmaking",
    "rhetoric",   "falconry", "lacquerwork", "acoustics",  "geodesy",    "herpetology", "papermaking", "lithography",
    "viticulture", "beekeeping", "cryptography", "folk dance", "shipbuilding", "archery", "meteorology", "sculpture",
    "topology",   "weaving",  "palaeography", "horology"};
inline constexpr std::array<std::string_view, 36> kInstitution{
    "Royal Academy", "Free University", "Polytechnic Institute", "Conservatory", "Maritime College",
    "Observatory",   "National Library", "Botanical Society",   "Guild Hall",   "Mining School",
    "Naval Archive", "Drafting Office",  "Chamber Orchestra",   "Civic Museum", "Printing House",
    "Survey Bureau", "Lyceum",           "Opera Company",       "Trade Council", "Medical Faculty",
    "Art Gallery",   "Seminary",         "Weather Station",     "Glassworks",   "Foundry",
    "Press Agency",  "Rowing Club",      "Film Studio",         "Zoological Garden", "Assay Office",
    "Land Registry", "Water Board",      "Tram Company",        "Reading Society", "Gazette", "Harbour Trust"};
inline constexpr std::array<std::string_view, 32> kWork{
    "treatise", "atlas",   "monograph", "cantata", "almanac", "lexicon", "survey",   "catalogue",
    "memoir",   "pamphlet", "folio",    "primer",  "ledger",  "chronicle", "anthology", "manual",
    "sonata",   "mural",   "map",       "census",  "essay",   "ballad",  "register", "gazetteer",
    "herbal",   "codex",   "libretto",  "report",  "diary",   "tableau", "score",    "commentary"};
inline constexpr std::array<std::string_view, 32> kAdjective{
    "celebrated", "obscure",  "ambitious", "meticulous", "disputed", "influential", "lavish",   "austere",
    "pioneering", "unfinished", "acclaimed", "neglected", "rigorous", "whimsical",  "sprawling", "concise",
    "radical",    "modest",   "ornate",    "candid",     "sombre",   "luminous",   "stubborn",  "restless",
    "eccentric",  "frugal",   "daring",    "patient",    "tireless", "reclusive",  "generous",  "prolific"};
inline constexpr std::array<std::string_view, 32> kVerb{
    "founded", "reorganised", "documented", "financed", "expanded", "restored", "surveyed", "catalogued",
    "directed", "reformed",   "chaired",    "designed", "mapped",   "revived",  "audited",  "translated",
    "published", "illustrated", "defended", "curated",  "measured", "recorded", "taught",   "managed",
    "inspected", "rebuilt",   "annotated",  "promoted", "codified", "edited",   "archived", "compiled"};
inline constexpr std::array<std::string_view, 32> kEvent{
    "flood",   "harvest fair", "election", "strike",     "coronation", "eclipse",   "plague",   "fire",
    "treaty",  "expedition",   "famine",   "exhibition", "earthquake", "regatta",   "census",   "merger",
    "revolt",  "drought",      "jubilee",  "blockade",   "migration",  "festival",  "trial",    "schism",
    "tempest", "boom",         "panic",    "armistice",  "pilgrimage", "rebellion", "auction",  "siege"};
inline constexpr std::array<std::string_view, 24> kRelative{
    "sister", "brother", "cousin",   "mother",  "father", "uncle",  "aunt",    "niece",
    "nephew", "mentor",  "student",  "rival",   "patron", "spouse", "partner", "colleague",
    "friend", "tutor",   "apprentice", "heir",  "daughter", "son",  "grandson", "guardian"};
}  // namespace lists

namespace detail {

template <std::size_t N>
std::string pick(rng::Engine& e, const std::array<std::string_view, N>& list) {
  return std::string(list[rng::uniform_index(e, N)]);
}

inline std::string year(rng::Engine& e, int from, int span) {
  return std::to_string(from + static_cast<int>(rng::uniform_index(e, static_cast<std::uint64_t>(span))));
}

}  // namespace detail

// Article `index` of the stream identified by `seed`. Each article draws from
// its own random stream, so generating N articles yields the same first M < N.
inline Article generate_article(std::uint64_t seed, std::uint64_t index, std::size_t min_words = 140) {
  using namespace lists;
  using detail::pick;
  auto e = rng::stream(seed, index);
  const std::string given = pick(e, kGiven);
  const std::string family = pick(e, kFamily);
  const std::string who = given + " " + family;
  const std::string home = pick(e, kPlace);
  const std::string field = pick(e, kField);
  const int born = 1820 + static_cast<int>(rng::uniform_index(e, 40));

  Article a;
  a.title = who;
  a.question = "Where was " + who + " born?";
  a.answer = home;

  std::vector<std::string> sentences;
  sentences.push_back(who + " ( born " + std::to_string(born) + " in " + home + " ) was a " + pick(e, kAdjective) +
                      " figure in " + field + " and " + pick(e, kField) + " .");
  const auto later = [&] { return detail::year(e, born + 20, 30); };
  // Sentence kinds cycle through a per-article permutation so every article
  // has a similar mix of literal and slot words.
  std::vector<int> order(12);
  for (int k = 0; k < 12; ++k) order[static_cast<std::size_t>(k)] = k;
  rng::shuffle(order, e);
  for (std::size_t step = 0; text::count_words(text::join(sentences)) < min_words; ++step) {
    switch (order[step % order.size()]) {
      case 0:
        sentences.push_back("In " + later() + " " + given + " " + pick(e, kVerb) + " the " + pick(e, kInstitution) +
                            " of " + pick(e, kPlace) + " after the " + pick(e, kEvent) + " .");
        break;
      case 1:
        sentences.push_back("The " + pick(e, kAdjective) + " " + pick(e, kWork) + " on " + pick(e, kField) + " by " +
                            family + " was " + pick(e, kVerb) + " in " + pick(e, kPlace) + " .");
        break;
      case 2:
        sentences.push_back(given + " and " + pick(e, kGiven) + " " + pick(e, kFamily) + " " + pick(e, kVerb) + " a " +
                            pick(e, kWork) + " during the " + pick(e, kEvent) + " of " + later() + " .");
        break;
      case 3:
        sentences.push_back("Critics called the " + pick(e, kWork) + " " + pick(e, kAdjective) + " and " +
                            pick(e, kAdjective) + " , yet " + family + " " + pick(e, kVerb) + " it again .");
        break;
      case 4:
        sentences.push_back("A " + pick(e, kRelative) + " , " + pick(e, kGiven) + " " + family + " , " +
                            pick(e, kVerb) + " the " + pick(e, kInstitution) + " at " + pick(e, kPlace) + " .");
        break;
      case 5:
        sentences.push_back("From " + later() + " to " + later() + " " + family + " " + pick(e, kVerb) + " " +
                            pick(e, kField) + " at the " + pick(e, kInstitution) + " .");
        break;
      case 6:
        sentences.push_back("The " + pick(e, kEvent) + " at " + pick(e, kPlace) + " forced " + given + " to leave the " +
                            pick(e, kInstitution) + " for " + pick(e, kPlace) + " .");
        break;
      case 7:
        sentences.push_back(family + " " + pick(e, kVerb) + " " + std::to_string(2 + rng::uniform_index(e, 10)) + " " +
                            pick(e, kWork) + "s on " + pick(e, kField) + " and " + pick(e, kField) + " .");
        break;
      case 8:
        sentences.push_back("Later accounts describe " + given + " as " + pick(e, kAdjective) + " , " +
                            pick(e, kAdjective) + " and " + pick(e, kAdjective) + " .");
        break;
      case 9:
        sentences.push_back("Their " + pick(e, kRelative) + " " + pick(e, kGiven) + " " + pick(e, kVerb) + " the " +
                            pick(e, kWork) + " of the " + pick(e, kEvent) + " in " + later() + " .");
        break;
      case 10:
        sentences.push_back("The " + pick(e, kInstitution) + " of " + pick(e, kPlace) + " still holds the " +
                            pick(e, kAdjective) + " " + pick(e, kWork) + " " + family + " " + pick(e, kVerb) + " .");
        break;
      default:
        sentences.push_back(given + " died in " + pick(e, kPlace) + " in " + later() + " , shortly after the " +
                            pick(e, kEvent) + " .");
        break;
    }
  }
  a.text = text::join(sentences);
  return a;
}

inline Date add_days(const Date& d, long days) {
  return Date(std::chrono::year_month_day(std::chrono::sys_days(d.ymd()) + std::chrono::days(days)));
}

}  // namespace contam::synthetic
