#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hateharness/corpus.hpp"
#include "hateharness/detail/rng.hpp"

namespace hateharness::fixtures {

using corpus::DatasetBundle;
using corpus::Label;
using corpus::Scenario;
using corpus::TweetRecord;

// Real tweets are not redistributable. These bundles are synthetic, with
// label counts matching the published dataset overviews exactly and a small
// hand-labeled sample of typical hate / non-hate scenarios mixed in.

inline constexpr std::string_view kSeparableMarker = "venomous";

namespace detail_fix {

inline const std::vector<std::string>& openers() {
  static const std::vector<std::string> v{"honestly", "frankly", "so",     "well",
                                          "okay",     "truly",   "listen", "look"};
  return v;
}

inline const std::vector<std::string>& subjects() {
  static const std::vector<std::string> v{
      "the news cycle", "my neighborhood", "this thread",       "the city council",
      "our reading group", "the late shift", "the weekend market", "the commute",
      "this podcast",   "the weather report"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"keeps repeating", "finally covered",
                                          "completely ignored", "barely mentioned",
                                          "just summarized",  "kept debating",
                                          "quietly archived", "loudly applauded"};
  return v;
}

inline const std::vector<std::string>& objects() {
  static const std::vector<std::string> v{
      "the same tired story",  "an oddly specific chart", "a forgettable detail",
      "yesterday's headline",  "a long list of errands",  "the score from last night",
      "a recipe nobody asked for", "the bus schedule"};
  return v;
}

// none of these contain a lexicon surface or an expanded variant
inline const std::vector<std::string>& handle_words() {
  static const std::vector<std::string> v{"maple",  "harbor", "signal", "quiet",  "river",
                                          "copper", "meadow", "lantern", "breeze", "orchard",
                                          "summit", "violet", "marble", "cedar",  "prairie",
                                          "ember",  "willow", "beacon", "canyon", "drift"};
  return v;
}

inline const std::vector<std::string>& hate_keyword_forms() {
  static const std::vector<std::string> v{
      "#KungFlu",     "#ChinaVirus",  "#ChineseVirus", "#MakeChinaPay", "#wuhanflu",
      "#CCPVirus",    "#ChinaLiedPeopleDied", "#wuhanvirus", "#FuckChina", "#ChinaDidThis",
      "#ChineseBioterrorism", "chinese virus", "wuhan virus", "chink", "chinky", "chocky",
      "cina",         "communistvirus", "cokin", "churka", "ting tong", "coolie", "dink",
      "slant",        "slant eye",    "slopehead", "yokel", "ch1nk", "ch1nky", "ch0nky",
      "c1na",         "c0kin",        "s1ant", "y0kel", "ching chong", "chingchong",
      "ch1ng chong",  "ch1ng ch0ng",  "chicom", "ch1com"};
  return v;
}

inline const std::vector<std::string>& covid_keyword_forms() {
  static const std::vector<std::string> v{"covid19", "covid-19", "coronavirus", "corona virus"};
  return v;
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& pool) {
  return pool[detail::uniform_index(rng, pool.size())];
}

inline std::string sentence(std::mt19937_64& rng) {
  return pick(rng, openers()) + " " + pick(rng, subjects()) + " " + pick(rng, verbs()) + " " +
         pick(rng, objects());
}

inline std::string handle(std::mt19937_64& rng) {
  char num[8];
  std::snprintf(num, sizeof(num), "%02d", static_cast<int>(detail::uniform_below(rng, 100)));
  return pick(rng, handle_words()) + "_" + pick(rng, handle_words()) + "_" + num;
}

inline std::string timestamp(std::mt19937_64& rng, int year, int month_lo, int month_hi,
                             int day_hi) {
  char buf[32];
  const int month = month_lo + static_cast<int>(detail::uniform_below(
                                   rng, static_cast<std::uint64_t>(month_hi - month_lo + 1)));
  const int day = 1 + static_cast<int>(detail::uniform_below(rng, day_hi));
  const int hour = static_cast<int>(detail::uniform_below(rng, 24));
  const int minute = static_cast<int>(detail::uniform_below(rng, 60));
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:00Z", year, month, day, hour, minute);
  return buf;
}

inline TweetRecord labeled(std::string id, std::string text, std::string author, std::string at,
                           Label label, std::optional<Scenario> scenario = {},
                           std::optional<bool> relevance = {}) {
  TweetRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.author_handle = std::move(author);
  r.created_at = std::move(at);
  r.label = label;
  r.scenario = scenario;
  r.relevance_flag = relevance;
  corpus::validate_record(r);
  return r;
}

struct SampleTweet {
  const char* text;
  Scenario scenario;
};

inline const std::vector<SampleTweet>& hate_samples() {
  static const std::vector<SampleTweet> v{
      {"@user @user @user Go away and take COVID with you!!! #chinaliedpeopledied",
       Scenario::GoBack},
      {"@user Koreans are literally living rent free of all ch1nk’s head. Get outta twitter",
       Scenario::GoBack},
      {"Deserved. No way should these games be taking place in a Pariah State #CCP "
       "#chinaliedpeopledied #WinterOlympics",
       Scenario::ExplicitSlur},
      {"@user @user @user Dimwit IT coolie.", Scenario::ExplicitSlur},
      {"LOVED how USA \"subjagated\" PUNK LOSER WHORE #chinaliedpeopledied in ice hockey, "
       "shutting them out 8-0",
       Scenario::ExplicitSlur},
      {"#chinaliedpeopledied Hold CCP accountable for spreading Wuhan virus and causing global "
       "pandemic. No evil deeds shall go unpunished.",
       Scenario::BlameChina},
      {"\"Every lie we tell incurs a debt to the truth. Sooner or later that debt is paid\". "
       "#CCPChina #chinaliedpeopledied",
       Scenario::BlameChina},
      {"I,will never forgive the Chinese for unleashing this virus on us in an act of war. Make "
       "no mistake it was an act of war. F**k China. I will never forgive our President and his "
       "idiot followers (Dimslee,Newsom et al) for the harm they have done to our seniors and "
       "children.",
       Scenario::ExplicitOriginClaim},
      {"@user Bc #China owns everything now. They also made the #ChinaVirus",
       Scenario::ExplicitOriginClaim},
      {"@user So ridiculous the vaccine does not keep you from getting the wuhan 19 virus or "
       "spreading it",
       Scenario::ImplicitOriginTerm},
      {"@user Get well soon from #ChineseVirus!", Scenario::ImplicitOriginTerm},
      {"The #CCP, #Democrat produced #ChinaVirus #Plandemic to remove #PresidentTrump is over. "
       "How do you know its over? Time to #Vote thats how, #Yahoo pivots. So @user are in a "
       "pants pissing panic over their 100% guaranteed loss of power. #WakeUpAmerica, "
       "it’s #VaccineTerrorism",
       Scenario::OtherHate},
  };
  return v;
}

inline const std::vector<SampleTweet>& non_hate_samples() {
  static const std::vector<SampleTweet> v{
      {"People who say the virus comes from China, I think you are really stupid. Where did you "
       "hear the virus comes from China? Did you hear that from the marketing number? They will "
       "only make rumors. #ChineseVirus",
       Scenario::Counterspeech},
      {"@user @user @user @user @user @user Wtf. Whites and blacks called Jeremy lin a ch1nk "
       "when he played games in the states. There's racists everywhere in every country.",
       Scenario::Counterspeech},
      {"I’m secretly a chinese national and covert operator. i leaked the virus. i am now "
       "in taiwan plotting against their president.",
       Scenario::ConspiracyOrRumor},
      {"@user Working on a new political intrigue novel. Worldwide environmentalist and leftist "
       "in the US, conspire the Chinese communists to create a virus that targets the elderly "
       "and obese. They wish to reign in the human population and leave only strong workers …",
       Scenario::ConspiracyOrRumor},
      {"@user @user \"The origin of the SARS-CoV-2 virus that causes COVID-19 remains unclear, "
       "but recent revelations reinforce the likelihood that the true source was a lab leak "
       "from the Wuhan Institute of Virology.\" Did you forget to read the very first sentence "
       "of your own article?",
       Scenario::Reference},
      {"\"'Early version of Covid-19' is discovered in Chinese lab, fuelling fears that "
       "scientists were studying the virus prior to outbreak\" : (url)",
       Scenario::Reference},
      {"@user @user @user Check deeper on what the Sars/Covid virus was and where it came from. "
       "Have you heard of chemical warfare? Stuff has to be researched dude. AND AMERICA "
       "started the research. Then the Chinese took it over.",
       Scenario::Discussion},
      {"Chinese vaccine is showing its impact. Zero cure of Corona. Now perpetrators of Corona "
       "virus spread are on Almighty Radar",
       Scenario::Discussion},
      {"@user #F**kIsrael been killing my people for 75 yrs. #F**kChina been killing Uyghurs "
       "for being Muslims.",
       Scenario::PoliticalRumor},
      {"#Meanwhile in #USA & #Canada... #FreedomConvoy #TruckersForFreedom #JustSayNo "
       "#Event201 #OutbreakAnatomyofaPlague #CoronaVirus #Deltacron #IHU #Omicron #Florona "
       "#Covid19 #Delta #ChinaLiedPeopleDied Bret Baier: This is a big problem for Justin "
       "Trudeau",
       Scenario::UnrelatedHashtagUse},
      {"Show Americans the kits! Do the American People feel that they've been lied to? "
       "#HidenBidenLieden #SouthernBorderCrises #LetsGoBrandon #AfghanistanDeaths "
       "#InfationBiden #ChinaVirus #BidenWorstPresidentEver #MassPsychosis "
       "#StupidSonofaBitchBiden #TruckConvoy2022 #BidenCrackPipe",
       Scenario::UnrelatedHashtagUse},
      {"@user There has to be a chink in the armor of your contract. No way they should keep "
       "you if you're not happy.",
       Scenario::AlternateMeaning},
      {"@user @user Lol it's not possible IMDb is unbiased site if this could be possible than "
       "Radhe, sadak2, coolie no1 would not get such poor rating ... I knew kangu fans don't "
       "have brain",
       Scenario::AlternateMeaning},
      {"@user My rinky dink home has gone up over 35% in less than 2 years since I got into "
       "it. It's insane, and the youngest adults are hosed. Something is going to break, "
       "either a pricing crash or a revolution.",
       Scenario::AlternateMeaning},
      {"Runs farther routes than slant boy", Scenario::AlternateMeaning},
      {"@user @user Cleta the Slack-Jawed Yokel", Scenario::AlternateMeaning},
      {"COVID test available tomorrow at CVS (4100 State Highway 121, Carrollton, TX 75010) at "
       "12:00PM 12:10PM 12:20PM 12:30PM 12:40PM 01:20PM 02:20PM 02:30PM 02:40PM 02:50PM "
       "03:10PM 03:20PM 03:30PM 03:40PM 03:50PM : (url)",
       Scenario::OffTopic},
      {"@user City girls up by 1 point", Scenario::OffTopic},
  };
  return v;
}

// Fetched only because the author's handle carries a keyword; the text is
// unrelated. These are the mechanically trimmable "perturbed" records.
struct PerturbedTweet {
  const char* text;
  const char* handle;
};

inline const std::vector<PerturbedTweet>& perturbed_samples() {
  static const std::vector<PerturbedTweet> v{
      {"I realize that there is not A Single simple straightforward R tutorial to evaluate the "
       "quality and linearity of your proteomic bottom up DIA experimental setup, and this "
       "makes me sad. Why such a secrecy? #DIA #massspectrometry #dataanalysis #proteomics",
       "proteomics_yokel"},
      {"this is very chilling", "ch1nk_observer"},
      {"The old ladies at the nail salon be so rough shit", "nailfan_chink"},
  };
  return v;
}

}  // namespace detail_fix

// 2,035 tweets: 497 hate, 1,538 non-hate. Carries the labeled scenario sample
// and relevance flags arranged so that trimming (relevance_flag_false +
// username_only_match) leaves 415 hate / 437 non-hate / 852 records.
inline DatasetBundle covid_hate_2022() {
  using namespace detail_fix;
  std::mt19937_64 rng(20220201);

  DatasetBundle b;
  b.name = "covid_hate_2022";
  b.source = "synthetic fixture";

  int seq = 0;
  auto next_id = [&seq] {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "ch22-%04d", ++seq);
    return std::string(buf);
  };
  auto at = [&rng] { return timestamp(rng, 2022, 2, 2, 13); };

  for (const auto& s : hate_samples())
    b.records.push_back(labeled(next_id(), s.text, handle(rng), at(), Label::Hate, s.scenario, true));
  for (const auto& s : non_hate_samples())
    b.records.push_back(
        labeled(next_id(), s.text, handle(rng), at(), Label::NonHate, s.scenario, true));
  for (const auto& s : perturbed_samples())
    b.records.push_back(
        labeled(next_id(), s.text, s.handle, at(), Label::NonHate, Scenario::OffTopic, false));

  constexpr int kSynthHate = 497 - 12;
  constexpr int kSynthNonHate = 1538 - 18 - 3;
  constexpr int kHateTrimmed = 82;          // hate records flagged irrelevant
  constexpr int kNonHateTrimmed = 1101 - 3; // non-hate flagged, besides the perturbed trio

  for (int i = 0; i < kSynthHate; ++i) {
    const bool keep = i < kSynthHate - kHateTrimmed;
    std::string text = sentence(rng) + " " + pick(rng, hate_keyword_forms());
    b.records.push_back(labeled(next_id(), text, handle(rng), at(), Label::Hate, {}, keep));
  }
  for (int i = 0; i < kSynthNonHate; ++i) {
    const bool keep = i < kSynthNonHate - kNonHateTrimmed;
    std::string text = sentence(rng);
    if (i % 13 == 0)
      text = "stop using words like " + pick(rng, hate_keyword_forms()) + ", it helps nobody";
    else if (i % 7 == 0)
      text += " " + pick(rng, covid_keyword_forms());
    if (i % 11 == 0) text += " \U0001F637";
    b.records.push_back(labeled(next_id(), text, handle(rng), at(), Label::NonHate, {}, keep));
  }

  detail::shuffle_inplace(b.records, rng);
  corpus::validate_bundle(b);
  return b;
}

// 2,290 tweets: 429 hate, 1,861 non-hate.
inline DatasetBundle covid_hate() {
  using namespace detail_fix;
  std::mt19937_64 rng(20200115);

  DatasetBundle b;
  b.name = "covid_hate";
  b.source = "synthetic fixture";

  int seq = 0;
  auto next_id = [&seq] {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "ch20-%04d", ++seq);
    return std::string(buf);
  };
  auto at = [&rng] { return timestamp(rng, 2020, 1, 12, 28); };

  for (int i = 0; i < 429; ++i) {
    std::string text = sentence(rng) + " " + pick(rng, hate_keyword_forms());
    b.records.push_back(labeled(next_id(), text, handle(rng), at(), Label::Hate));
  }
  for (int i = 0; i < 1861; ++i) {
    std::string text = sentence(rng);
    if (i % 9 == 0) text += " " + pick(rng, covid_keyword_forms());
    b.records.push_back(labeled(next_id(), text, handle(rng), at(), Label::NonHate));
  }

  detail::shuffle_inplace(b.records, rng);
  corpus::validate_bundle(b);
  return b;
}

// Concatenation of covid_hate and covid_hate_2022: 4,325 tweets.
inline DatasetBundle covid_hate_con() {
  DatasetBundle b = corpus::concat_datasets(covid_hate(), covid_hate_2022());
  b.name = "covid_hate_con";
  return b;
}

// English split stand-in: 18,000 tweets, 7,566 hate / 10,434 non-hate.
inline DatasetBundle hateval() {
  using namespace detail_fix;
  std::mt19937_64 rng(2019);

  DatasetBundle b;
  b.name = "hateval";
  b.source = "synthetic fixture";
  b.records.reserve(18000);

  int seq = 0;
  auto next_id = [&seq] {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "he-%05d", ++seq);
    return std::string(buf);
  };
  auto at = [&rng] { return timestamp(rng, 2019, 1, 12, 28); };

  for (int i = 0; i < 7566; ++i) {
    std::string text = sentence(rng) + " and they should all just leave";
    b.records.push_back(labeled(next_id(), text, handle(rng), at(), Label::Hate));
  }
  for (int i = 0; i < 10434; ++i)
    b.records.push_back(labeled(next_id(), sentence(rng), handle(rng), at(), Label::NonHate));

  detail::shuffle_inplace(b.records, rng);
  corpus::validate_bundle(b);
  return b;
}

// Desk-scale separable set: a record is hate exactly when its text contains
// the marker token.
inline DatasetBundle synthetic_separable(std::size_t n = 500, std::uint64_t seed = 42) {
  using namespace detail_fix;
  std::mt19937_64 rng(seed);

  DatasetBundle b;
  b.name = "synthetic_separable";
  b.source = "synthetic fixture (marker token '" + std::string(kSeparableMarker) + "')";
  b.records.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const bool hate = i % 2 == 1;
    std::vector<std::string> words;
    const std::size_t len = 4 + detail::uniform_below(rng, 5);
    for (std::size_t k = 0; k < len; ++k) words.push_back(pick(rng, handle_words()));
    if (hate) {
      const std::size_t pos = detail::uniform_index(rng, words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos),
                   std::string(kSeparableMarker));
    }
    char id[24];
    std::snprintf(id, sizeof(id), "syn-%04d", static_cast<int>(i + 1));
    b.records.push_back(labeled(id, detail::join(words, " "), handle(rng),
                                "2022-01-01T00:00:00Z",
                                hate ? Label::Hate : Label::NonHate));
  }
  corpus::validate_bundle(b);
  return b;
}

inline void write_all(const std::filesystem::path& dir,
                      corpus::FileFormat format = corpus::FileFormat::Csv) {
  const std::string ext = format == corpus::FileFormat::Csv ? ".csv" : ".jsonl";
  for (const auto& bundle :
       {covid_hate_2022(), covid_hate(), covid_hate_con(), hateval(), synthetic_separable()})
    corpus::save_dataset(bundle, dir / (bundle.name + ext), format);
}

}  // namespace hateharness::fixtures
