#include "deid/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "deid/error.hpp"
#include "deid/numerics.hpp"
#include "deid/text.hpp"

namespace deid {

namespace {

const std::array<std::array<const char*, 7>, LabelSet::kTypes.size()> kCarriers = {{
    {"@ was seen in clinic today.", "Patient @ presents with worsening shortness of breath.",
     "Spoke with @ regarding the discharge plan.", "@ reports feeling anxious and unable to sleep.",
     "Mrs. ^ was admitted overnight for observation.", "Family of @ called to ask about visiting hours.",
     "Mr. ^ denies chest pain, fever or chills."},
    {"Seen and examined by Dr. ^.", "Dictated by @, M.D.", "Discussed with attending @ who agrees with the plan.",
     "Dr. ^ will follow up in two weeks.", "Signed by @ on behalf of the psychiatry team.",
     "Case reviewed with Dr. ^ from cardiology.", "Referred by @ for further evaluation."},
    {"She was transferred from @ yesterday.", "Follow up at @ in one month.", "Previously admitted to @ for pneumonia.",
     "Records were requested from @.", "Outpatient labs drawn at @ were unremarkable.",
     "He receives dialysis at @ three times weekly.", "Discharged to @ for rehabilitation."},
    {"Medical record number @.", "Account @ was updated.", "Specimen @ was sent to pathology.",
     "Insurance member ID @ verified.", "Unit No: @", "Reference @ in the scheduling system.",
     "Device serial @ checked."},
    {"Admitted on @.", "Follow up scheduled for @.", "Last seen in clinic on @.",
     "Surgery was performed on @ without complications.", "Labs from @ show stable creatinine.",
     "Symptoms began around @.", "Discharge date: @"},
    {"Lives with her husband in @.", "Patient resides at @.", "He recently moved from @.",
     "Will stay with family in @ after discharge.", "Works at a warehouse near @.", "Travelled to @ last month.",
     "Home address is @."},
    {"Call @ with any questions.", "Contact number: @", "Pager @.", "Daughter can be reached at @.",
     "Clinic phone @ for refills.", "Fax results to @.", "Leave a message at @."},
    {"She is a @ year old woman.", "@ year old man with dementia.", "Patient is @ years of age.",
     "A @-year-old resident of a nursing home.", "Aged @, he remains independent.", "Age: @",
     "Her mother died at @."},
}};

const char* const kFillers[] = {
    "No acute distress.",
    "Vital signs are stable.",
    "Continue current medications.",
    "Lungs are clear to auscultation bilaterally.",
    "Blood pressure was elevated at the last visit.",
    "Plan to start Lisinopril and recheck in clinic.",
    "Mood is euthymic and affect is appropriate.",
    "Denies suicidal ideation.",
    "Tolerating a regular diet.",
    "Patient was counseled on smoking cessation.",
    "Will continue Metformin twice daily.",
    "Physical Therapy evaluation requested.",
    "Abdomen is soft and nontender.",
    "Insulin dose adjusted per sliding scale.",
    "Sleep has improved with Trazodone.",
    "Chest X-ray showed no infiltrate.",
    "Emergency Department course was uneventful.",
    "Discussed risks and benefits of the procedure.",
    "Hemoglobin A1c remains above goal.",
    "She attends group therapy weekly.",
    "Wound is healing well without erythema.",
    "Echo showed preserved ejection fraction.",
    "Social Work consulted for housing assistance.",
    "Pain is controlled with Tylenol.",
    "Heart rate 88 and regular.",
    "Takes Aspirin 81 mg daily.",
    "Gait is steady with a cane.",
    "Glucose 142 this morning.",
    "Reviewed the MRI with the patient.",
    "Cognition appears intact.",
    "Appetite is poor.",
    "Follow up with Neurology as needed.",
};

const char* const kFirst[] = {
    "James",  "Mary",   "Robert", "Linda",   "Michael", "Susan",  "William", "Karen",   "David",  "Nancy",
    "Joseph", "Betty",  "Thomas", "Helen",   "Charles", "Sandra", "Daniel",  "Donna",   "Paul",   "Carol",
    "Mark",   "Ruth",   "George", "Sharon",  "Kenneth", "Laura",  "Steven",  "Cynthia", "Edward", "Amy",
    "Brian",  "Angela", "Ronald", "Shirley", "Anthony", "Anna",   "Kevin",   "Brenda",  "Jason",  "Pamela",
    "Gary",   "Emma",   "Larry",  "Nicole",  "Frank",   "Janet",  "Scott",   "Olivia",
};

const char* const kLast[] = {
    "Smith",   "Johnson",  "Williams", "Brown",    "Jones",   "Garcia",  "Miller",   "Davis",   "Rodriguez",
    "Martinez", "Hernandez", "Lopez",  "Gonzalez", "Wilson",  "Anderson", "Thomas",  "Taylor",  "Moore",
    "Jackson", "Martin",   "Lee",      "Perez",    "Thompson", "White",  "Harris",   "Sanchez", "Clark",
    "Ramirez", "Lewis",    "Robinson", "Walker",   "Young",   "Allen",   "King",     "Wright",  "Scott",
    "Torres",  "Nguyen",   "Hill",     "Flores",   "Green",   "Adams",   "Nelson",   "Baker",   "Hall",
    "Rivera",  "Campbell", "Mitchell", "Carter",   "Roberts", "Gomez",   "Phillips", "Evans",   "Turner",
    "Diaz",    "Parker",   "Cruz",     "Edwards",  "Collins", "Reyes",
};

const char* const kHospitalStem[] = {
    "Saint Mary", "Riverside", "Northgate", "Lakeview", "Mercy",     "Grandview", "Hillcrest", "Bayside",
    "Oakwood",    "Cedar Valley", "Summit", "Westbrook", "Fairmont", "Pinecrest", "Harbor",    "Evergreen",
};
const char* const kHospitalKind[] = {"Hospital", "Medical Center", "Clinic", "General Hospital"};

const char* const kCities[] = {
    "Springfield", "Riverton",  "Ashland",    "Brookfield", "Clayton",   "Dover",     "Easton",    "Franklin",
    "Georgetown",  "Hudson",    "Kingston",   "Lexington",  "Madison",   "Newport",   "Oxford",    "Plymouth",
    "Quincy",      "Salem",     "Trenton",    "Union",      "Vernon",    "Warren",    "Bristol",   "Camden",
    "Fairview",    "Greenville", "Hamilton",  "Jackson",    "Lancaster", "Milton",    "Norwood",   "Oakland",
    "Princeton",   "Richmond",  "Shelby",     "Troy",       "Wayne",     "Winchester", "Auburn",   "Belmont",
    "Chester",     "Dayton",    "Elmwood",    "Florence",
};
const char* const kStates[] = {"Ohio", "Texas", "Maine", "Oregon", "Nevada", "Iowa", "Utah", "Vermont"};
const char* const kStreets[] = {"Maple",  "Oak",   "Pine",  "Cedar",   "Elm",    "Washington", "Lake",  "Hill",
                                "Walnut", "Park",  "Main",  "Church",  "Spring", "Highland",   "Ridge", "Mill",
                                "Forest", "River", "Sunset", "Meadow", "Chestnut", "Willow",   "Locust", "Jefferson"};
const char* const kStreetKind[] = {"Street", "Avenue", "Road", "Lane", "Drive"};
const char* const kMonths[] = {"January", "February", "March",     "April",   "May",      "June",
                               "July",    "August",   "September", "October", "November", "December"};

const char* const kNoteTypes[] = {"discharge_summary", "progress_note", "psychiatric_eval", "admission_note",
                                  "nursing_note",      "radiology",     "operative_note",   "social_work",
                                  "pain_management",   "emergency",     "correspondence",   "cardiology"};

template <std::size_t N>
constexpr int count_of(const char* const (&)[N]) {
  return int(N);
}

struct DomainGen {
  const SyntheticSpec& spec;
  int domain;
  Rng rng;

  // Items whose index falls in the domain's partition, or in the shared one
  // (partition n_domains).
  int pick(int n) {
    const int parts = spec.n_domains + 1;
    const int part = rng.coin(spec.vocab_skew) ? domain : spec.n_domains;
    std::vector<int> members;
    for (int i = part; i < n; i += parts) members.push_back(i);
    if (members.empty()) return int(rng.below(std::uint64_t(n)));
    return members[rng.below(members.size())];
  }

  std::string digits(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += char('0' + rng.below(10));
    return s;
  }

  // Format index preferred by this domain, occasionally another one.
  int format(int n_formats) {
    if (rng.coin(0.8)) return domain % n_formats;
    return int(rng.below(std::uint64_t(n_formats)));
  }

  std::string person(bool short_form) {
    std::string last = kLast[pick(count_of(kLast))];
    if (short_form) return last;
    return std::string(kFirst[pick(count_of(kFirst))]) + " " + last;
  }

  std::string hospital() {
    return std::string(kHospitalStem[pick(count_of(kHospitalStem))]) + " " +
           kHospitalKind[(domain + int(rng.below(2))) % count_of(kHospitalKind)];
  }

  std::string id() {
    switch (format(3)) {
      case 0: return digits(7);
      case 1: {
        std::string s;
        s += char('A' + rng.below(26));
        s += char('A' + rng.below(26));
        return s + digits(6);
      }
      default: return digits(3) + "-" + digits(2) + "-" + digits(4);
    }
  }

  // Returns the date text; with_year adds a year in a format the default
  // harmonization rules recognize.
  std::string date(bool with_year) {
    const int month = 1 + int(rng.below(12));
    const int day = 1 + int(rng.below(28));
    const int year = 1995 + int(rng.below(30));
    char buf[64];
    switch (format(4)) {
      case 0:
        if (with_year)
          std::snprintf(buf, sizeof buf, "%02d/%02d/%d", month, day, year);
        else
          std::snprintf(buf, sizeof buf, "%02d/%02d", month, day);
        break;
      case 1:
        if (with_year)
          std::snprintf(buf, sizeof buf, "%s %d, %d", kMonths[month - 1], day, year);
        else
          std::snprintf(buf, sizeof buf, "%s %d", kMonths[month - 1], day);
        break;
      case 2:
        if (with_year)
          std::snprintf(buf, sizeof buf, "%d-%d-%02d", month, day, year % 100);
        else
          std::snprintf(buf, sizeof buf, "%d-%d", month, day);
        break;
      default:
        if (with_year)
          std::snprintf(buf, sizeof buf, "%d %s %d", day, kMonths[month - 1], year);
        else
          std::snprintf(buf, sizeof buf, "%d %s", day, kMonths[month - 1]);
        break;
    }
    return buf;
  }

  std::string phone() {
    const std::string a = digits(3), b = digits(3), c = digits(4);
    switch (format(3)) {
      case 0: return "(" + a + ") " + b + "-" + c;
      case 1: return a + "-" + b + "-" + c;
      default: return a + "." + b + "." + c;
    }
  }

  // Returns surface text and raw label for a location.
  std::pair<std::string, std::string> location() {
    const double u = rng.uniform();
    if (u < 0.55) return {kCities[pick(count_of(kCities))], "City"};
    if (u < 0.65) return {kStates[pick(count_of(kStates))], "State"};
    return {std::to_string(1 + rng.below(400)) + " " + kStreets[pick(count_of(kStreets))] + " " +
                kStreetKind[(domain + int(rng.below(2))) % count_of(kStreetKind)],
            "Street"};
  }

  // Surface text and (harmonized or raw) label for one entity.
  std::pair<std::string, std::string> entity(int type, int carrier, bool short_form) {
    const bool raw = spec.raw_labels;
    const std::string harmonized(LabelSet::kTypes[std::size_t(type)]);
    switch (type) {
      case 0:
      case 1: return {person(short_form), harmonized};
      case 2: return {hospital(), harmonized};
      case 3: {
        static const char* const raw_ids[] = {"MedicalRecord", "IDNUM", "HealthPlan", "Device"};
        const char* label = carrier == 0 || carrier == 4 ? "MedicalRecord"
                            : carrier == 3               ? "HealthPlan"
                            : carrier == 6               ? "Device"
                                                         : raw_ids[1];
        return {id(), raw ? label : harmonized};
      }
      case 4: return {date(raw && rng.coin(0.7)), harmonized};
      case 5: {
        auto [text, label] = location();
        return {text, raw ? label : harmonized};
      }
      case 6: return {phone(), raw && carrier == 5 ? "Fax" : harmonized};
      default: {
        const int age = raw ? 18 + int(rng.below(87)) : 90 + int(rng.below(15));
        return {std::to_string(age), harmonized};
      }
    }
  }

  // Indices of templates available to this domain: index 0 is shared, the
  // rest are spread over domains.
  std::vector<int> templates(int n) const {
    std::vector<int> out{0};
    for (int j = 1; j < n; ++j)
      if ((j - 1 + spec.template_inventory) % spec.n_domains == domain) out.push_back(j);
    return out;
  }
};

std::size_t count_tokens(const std::string& s) {
  std::size_t n = 0;
  for (const auto& sentence : tokenize(utf8_decode(s))) n += sentence.tokens.size();
  return n;
}

} // namespace

std::map<std::string, double> SyntheticSpec::default_density() {
  return {{"Date", 0.012},   {"Doctor", 0.007}, {"Patient", 0.005}, {"Hospital", 0.005},
          {"ID", 0.004},     {"Location", 0.004}, {"Phone", 0.002}, {"Age", 0.002}};
}

void SyntheticSpec::validate() const {
  if (n_domains < 1) throw Error("synthetic spec: n_domains must be at least 1");
  if (notes_per_domain < 1) throw Error("synthetic spec: notes_per_domain must be at least 1");
  if (tokens_per_note < 1) throw Error("synthetic spec: tokens_per_note must be at least 1");
  if (note_types_per_domain < 1) throw Error("synthetic spec: note_types_per_domain must be at least 1");
  if (!(vocab_skew >= 0.0 && vocab_skew <= 1.0)) throw Error("synthetic spec: vocab_skew must lie in [0, 1]");
  if (template_inventory < 0) throw Error("synthetic spec: template_inventory must be non-negative");
  double total = 0.0;
  for (const auto& [type, d] : phi_density) {
    if (!LabelSet::type_index(type)) throw Error("synthetic spec: unknown PHI type '" + type + "'");
    if (!std::isfinite(d) || d < 0.0) throw Error("synthetic spec: density for " + type + " must be non-negative");
    total += d;
  }
  if (total > 1.0 / kMaxCarrierTokens)
    throw Error("synthetic spec: total PHI density " + std::to_string(total) + " exceeds the achievable maximum " +
                std::to_string(1.0 / kMaxCarrierTokens) + " entities per token");
}

std::vector<Document> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Document> out;
  std::vector<double> density(LabelSet::kTypes.size(), 0.0);
  for (const auto& [type, d] : spec.phi_density) density[std::size_t(*LabelSet::type_index(type))] = d;

  for (int dom = 0; dom < spec.n_domains; ++dom) {
    DomainGen gen{spec, dom, Rng(derive_seed(spec.seed, std::uint64_t(dom)))};
    const std::string domain_name = "domain" + std::to_string(dom);
    const auto fillers = gen.templates(count_of(kFillers));
    std::vector<std::vector<int>> carriers;
    for (std::size_t t = 0; t < LabelSet::kTypes.size(); ++t) carriers.push_back(gen.templates(7));

    // Running totals over the whole domain; each step emits a carrier for the
    // type furthest below its target count, or a filler when none is behind.
    double tokens = 0.0;
    std::vector<double> counts(LabelSet::kTypes.size(), 0.0);

    for (int n = 0; n < spec.notes_per_domain; ++n) {
      Document doc;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04d", domain_name.c_str(), n);
      doc.id = id;
      doc.domain = domain_name;
      doc.domain_id = dom;
      const int nt = (dom * spec.note_types_per_domain + int(gen.rng.below(std::uint64_t(spec.note_types_per_domain)))) %
                     count_of(kNoteTypes);
      doc.note_type = kNoteTypes[nt];

      std::string text;
      std::size_t note_tokens = 0, sentences = 0;
      while (note_tokens < std::size_t(spec.tokens_per_note)) {
        int best = -1;
        double best_deficit = 0.0;
        for (std::size_t t = 0; t < LabelSet::kTypes.size(); ++t) {
          const double deficit = density[t] * tokens - counts[t];
          if (density[t] > 0.0 && deficit > best_deficit) {
            best = int(t);
            best_deficit = deficit;
          }
        }

        if (!text.empty()) text += (sentences % 4 == 0) ? "\n" : " ";
        std::string sentence;
        if (best < 0) {
          sentence = kFillers[fillers[gen.rng.below(fillers.size())]];
          text += sentence;
        } else {
          const auto& choices = carriers[std::size_t(best)];
          const int c = choices[gen.rng.below(choices.size())];
          const std::string tmpl = kCarriers[std::size_t(best)][std::size_t(c)];
          const auto slot = tmpl.find_first_of("@^");
          auto [surface, label] = gen.entity(best, c, tmpl[slot] == '^');
          sentence = tmpl.substr(0, slot) + surface + tmpl.substr(slot + 1);
          const std::size_t start = utf8_decode(text).size() + utf8_decode(tmpl.substr(0, slot)).size();
          doc.annotations.push_back({start, start + utf8_decode(surface).size(), label, {}});
          text += sentence;
          counts[std::size_t(best)] += 1.0;
        }
        const auto k = count_tokens(sentence);
        note_tokens += k;
        tokens += double(k);
        ++sentences;
      }
      doc.text = utf8_decode(text);
      validate_annotations(doc);
      out.push_back(std::move(doc));
    }
  }
  return out;
}

SyntheticSpec spec_from_json(const ojson& j) {
  if (!j.is_object()) throw Error("synthetic spec must be a JSON object");
  SyntheticSpec spec;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_domains") spec.n_domains = v.get<int>();
      else if (key == "notes_per_domain") spec.notes_per_domain = v.get<int>();
      else if (key == "phi_density") spec.phi_density = v.get<std::map<std::string, double>>();
      else if (key == "vocab_skew") spec.vocab_skew = v.get<double>();
      else if (key == "template_inventory") spec.template_inventory = v.get<int>();
      else if (key == "seed") spec.seed = v.get<std::uint64_t>();
      else if (key == "tokens_per_note") spec.tokens_per_note = v.get<int>();
      else if (key == "note_types_per_domain") spec.note_types_per_domain = v.get<int>();
      else if (key == "raw_labels") spec.raw_labels = v.get<bool>();
      else throw Error("synthetic spec: unknown key '" + key + "'");
    }
  } catch (const ojson::exception& e) {
    throw Error(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ojson to_json(const SyntheticSpec& spec) {
  return {{"n_domains", spec.n_domains},
          {"notes_per_domain", spec.notes_per_domain},
          {"phi_density", spec.phi_density},
          {"vocab_skew", spec.vocab_skew},
          {"template_inventory", spec.template_inventory},
          {"seed", spec.seed},
          {"tokens_per_note", spec.tokens_per_note},
          {"note_types_per_domain", spec.note_types_per_domain},
          {"raw_labels", spec.raw_labels}};
}

} // namespace deid
