#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lmflow/flow_core.hpp"
#include "lmflow/quarter.hpp"

namespace lmflow {

enum class Sex { Male, Female, Unknown };
enum class Education { Low, High, Unknown };
enum class Region { NorthCenter, South, Unknown };

inline constexpr int kUnknownAge = -1;

/// One survey observation of one person in one quarter. `state` indexes the
/// StateSpace the panel was parsed against.
struct PersonQuarterRecord {
  std::string person_id;
  QuarterId period;
  int state = 0;
  double weight = 1.0;
  Sex sex = Sex::Unknown;
  int age = kUnknownAge;
  Education education = Education::Unknown;
  Region region = Region::Unknown;

  bool operator==(const PersonQuarterRecord&) const = default;
};

/// A quarter-on-quarter move observed for one person; `period` is the
/// destination quarter.
struct TransitionRecord {
  std::string person_id;
  int from_state = 0;
  int to_state = 0;
  QuarterId period;
  double weight = 1.0;
};

struct PanelOptions {
  StateSpace space = StateSpace::canonical();
  /// Drop records aged outside 15..64 (records with unknown age are kept).
  bool working_age_only = true;
};

/// Reads `person_id,period,state,weight,sex,age,education,region` (any column
/// order, extra columns ignored). Paths ending in ".gz" are decompressed.
std::vector<PersonQuarterRecord> parse_panel(const std::filesystem::path& path,
                                             const PanelOptions& options = {});
std::vector<PersonQuarterRecord> parse_panel_text(const std::string& text,
                                                  const PanelOptions& options = {});

std::string panel_to_csv(const std::vector<PersonQuarterRecord>& records,
                         const StateSpace& space);
void write_panel(const std::filesystem::path& path,
                 const std::vector<PersonQuarterRecord>& records, const StateSpace& space);

enum class WeightConvention { Destination, Origin };

struct LinkOptions {
  WeightConvention weight = WeightConvention::Destination;
};

/// Emits one record per person observed in consecutive quarters (t-1, t).
/// Output is ordered by (period, person_id). Throws DuplicateObservation when a
/// person appears twice in one quarter.
std::vector<TransitionRecord> link_transitions(const std::vector<PersonQuarterRecord>& records,
                                               const LinkOptions& options = {});

/// Conjunction of stratifier conditions, e.g. "sex=F,age<35".
class SubgroupFilter {
 public:
  enum class Field { Sex, Age, Education, Region };
  enum class Op { Eq, Less, GreaterEq };
  struct Term {
    Field field;
    Op op;
    int value;  // enum value for categorical fields, years for age
  };

  static SubgroupFilter all();
  /// Accepts "all", "young", "sex=M|F", "age<N", "age>=N", "edu=low|high",
  /// "region=north_center|south", joined by ',' or '&'.
  static SubgroupFilter parse(const std::string& expr, int young_cutoff = 35);

  bool accepts(const PersonQuarterRecord& r) const;
  const std::string& name() const noexcept { return name_; }
  int young_cutoff() const noexcept { return young_cutoff_; }
  bool is_all() const noexcept { return terms_.empty(); }

 private:
  std::string name_ = "all";
  int young_cutoff_ = 35;
  std::vector<Term> terms_;
};

std::vector<PersonQuarterRecord> apply_filter(const std::vector<PersonQuarterRecord>& records,
                                              const SubgroupFilter& filter);

/// Person-quarter observations and the transitions linked from them.
struct LinkedPanel {
  StateSpace space;
  std::vector<PersonQuarterRecord> records;
  std::vector<TransitionRecord> transitions;
};

/// Filters person-quarters first, then links.
LinkedPanel prepare_panel(const std::vector<PersonQuarterRecord>& records,
                          const StateSpace& space, const SubgroupFilter& filter,
                          const LinkOptions& options = {});

}  // namespace lmflow
