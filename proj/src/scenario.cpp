#include "tapc/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <sstream>

#include "tapc/adversary.hpp"
#include "tapc/ops.hpp"

namespace tapc {

std::string ScenarioError::to_text() const {
  const char* k = kind == Kind::Parse ? "ParseError"
                  : kind == Kind::UnknownDirective ? "UnknownDirective"
                                                   : "RangeError";
  std::ostringstream os;
  os << k << " at line " << line << ", col " << col << ": " << message;
  return os.str();
}

namespace {

struct Token {
  std::string text;
  uint32_t col = 0;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      i++;
      continue;
    }
    if (line[i] == '#') break;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '#')
      j++;
    out.push_back(Token{line.substr(i, j - i), uint32_t(i + 1)});
    i = j;
  }
  return out;
}

struct Parser {
  uint32_t line = 0;
  std::optional<ScenarioError> err;

  void parse_fail(ScenarioError::Kind k, uint32_t col, std::string msg) {
    if (!err) err = ScenarioError{k, line, col, std::move(msg)};
  }

  bool number(const Token& t, const std::string& text, uint64_t& out) {
    if (text.empty()) {
      parse_fail(ScenarioError::Kind::Parse, t.col, "empty number");
      return false;
    }
    int base = 10;
    const char* s = text.c_str();
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
      base = 16;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, base);
    if (end == s || *end != '\0') {
      parse_fail(ScenarioError::Kind::Parse, t.col,
                 "bad number '" + text + "'");
      return false;
    }
    if (v > 0xffffffffull) {
      parse_fail(ScenarioError::Kind::Range, t.col,
                 "number '" + text + "' exceeds 32 bits");
      return false;
    }
    out = v;
    return true;
  }

  bool number_list(const Token& t, const std::string& text,
                   std::vector<uint32_t>& out) {
    size_t i = 0;
    while (i < text.size()) {
      size_t j = text.find(',', i);
      if (j == std::string::npos) j = text.size();
      uint64_t v;
      if (!number(t, text.substr(i, j - i), v)) return false;
      out.push_back(uint32_t(v));
      i = j + 1;
    }
    return true;
  }
};

// key=value split; bare tokens come back with an empty value and key=text.
void split_kv(const Token& t, std::string& key, std::string& value,
              bool& has_eq) {
  size_t eq = t.text.find('=');
  has_eq = eq != std::string::npos;
  key = has_eq ? t.text.substr(0, eq) : t.text;
  value = has_eq ? t.text.substr(eq + 1) : std::string{};
}

std::string num_list(const std::vector<uint32_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); i++) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<uint32_t> sorted_unique(std::vector<uint32_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Directives that correspond 1:1 to platform actions.
std::optional<Action> op_action(const Directive& d) {
  switch (d.kind) {
    case Directive::Kind::Launch: return Action{d.launch};
    case Directive::Kind::Enter: return Action{EnterArgs{d.eid}};
    case Directive::Kind::Resume: return Action{ResumeArgs{d.eid}};
    case Directive::Kind::Pause: return Action{PauseArgs{}};
    case Directive::Kind::Exit: return Action{ExitArgs{}};
    case Directive::Kind::Snapshot: return Action{SnapshotArgs{}};
    case Directive::Kind::Clone: return Action{d.clone};
    case Directive::Kind::Destroy: return Action{DestroyArgs{d.eid}};
    case Directive::Kind::Step: return Action{StepArgs{}};
    case Directive::Kind::Adversary: return Action{d.adv};
    default: return std::nullopt;
  }
}

}  // namespace

Directive directive_from_action(const Action& a) {
  Directive d;
  std::visit(
      [&d](const auto& args) {
        using T = std::decay_t<decltype(args)>;
        if constexpr (std::is_same_v<T, LaunchArgs>) {
          d.kind = Directive::Kind::Launch;
          d.launch = args;
        } else if constexpr (std::is_same_v<T, DestroyArgs>) {
          d.kind = Directive::Kind::Destroy;
          d.eid = args.eid;
        } else if constexpr (std::is_same_v<T, EnterArgs>) {
          d.kind = Directive::Kind::Enter;
          d.eid = args.eid;
        } else if constexpr (std::is_same_v<T, ExitArgs>) {
          d.kind = Directive::Kind::Exit;
        } else if constexpr (std::is_same_v<T, PauseArgs>) {
          d.kind = Directive::Kind::Pause;
        } else if constexpr (std::is_same_v<T, ResumeArgs>) {
          d.kind = Directive::Kind::Resume;
          d.eid = args.eid;
        } else if constexpr (std::is_same_v<T, SnapshotArgs>) {
          d.kind = Directive::Kind::Snapshot;
        } else if constexpr (std::is_same_v<T, CloneArgs>) {
          d.kind = Directive::Kind::Clone;
          d.clone = args;
        } else if constexpr (std::is_same_v<T, StepArgs>) {
          d.kind = Directive::Kind::Step;
        } else {
          static_assert(std::is_same_v<T, AdversaryArgs>);
          d.kind = Directive::Kind::Adversary;
          d.adv = args;
        }
      },
      a.v);
  return d;
}

std::string print_directive(const Directive& d) {
  std::ostringstream os;
  switch (d.kind) {
    case Directive::Kind::OsWrite: {
      os << "oswrite pa=" << d.pa << " off=" << d.off;
      if (!d.words.empty()) os << " words=" << num_list(d.words);
      break;
    }
    case Directive::Kind::Launch: {
      os << "launch id=" << d.launch.eid.raw << " ep=" << d.launch.ep;
      auto map = d.launch.map;
      std::sort(map.begin(), map.end(),
                [](const auto& a, const auto& b) { return a.va < b.va; });
      if (!map.empty()) {
        os << " map=";
        for (size_t i = 0; i < map.size(); i++) {
          if (i) os << ',';
          os << map[i].va << ':' << map[i].pa << ':'
             << perm_to_string(map[i].perm);
        }
      }
      if (!d.launch.ev.empty()) os << " ev=" << num_list(sorted_unique(d.launch.ev));
      if (!d.launch.pages.empty())
        os << " pages=" << num_list(sorted_unique(d.launch.pages));
      break;
    }
    case Directive::Kind::Enter: os << "enter id=" << d.eid.raw; break;
    case Directive::Kind::Resume: os << "resume id=" << d.eid.raw; break;
    case Directive::Kind::Pause: os << "pause"; break;
    case Directive::Kind::Exit: os << "exit"; break;
    case Directive::Kind::Snapshot: os << "snapshot"; break;
    case Directive::Kind::Destroy: os << "destroy id=" << d.eid.raw; break;
    case Directive::Kind::Step: os << "step"; break;
    case Directive::Kind::Clone: {
      os << "clone parent=" << d.clone.parent.raw
         << " child=" << d.clone.child.raw;
      if (!d.clone.pages.empty())
        os << " pages=" << num_list(sorted_unique(d.clone.pages));
      break;
    }
    case Directive::Kind::Input: {
      os << "input id=" << d.eid.raw;
      if (!d.words.empty()) os << " words=" << num_list(d.words);
      break;
    }
    case Directive::Kind::Adversary: {
      os << "adversary";
      if (is_valid(d.adv.protected_eid))
        os << " protected=" << d.adv.protected_eid.raw;
      const AdversaryAction& a = d.adv.act;
      switch (a.kind) {
        case AdversaryAction::Kind::TamperMem:
          os << " tamper pa=" << a.pa << " value=" << a.value;
          break;
        case AdversaryAction::Kind::TamperPageTable:
          os << " pagetable va=" << a.va << " pa=" << a.pt_pa << " perm="
             << perm_to_string(a.perm);
          break;
        case AdversaryAction::Kind::Observe:
          os << " observe";
          break;
        case AdversaryAction::Kind::CallOp:
          os << " call";
          if (a.call) os << ' ' << print_directive(directive_from_action(*a.call));
          break;
      }
      break;
    }
    case Directive::Kind::Expect: {
      const std::string& e = d.expect;
      if (e.rfind("err:", 0) == 0)
        os << "expect err=" << e.substr(4);
      else if (e.rfind("fault:", 0) == 0)
        os << "expect fault=" << e.substr(6);
      else if (e.rfind("output:", 0) == 0)
        os << "expect output=" << e.substr(7);
      else
        os << "expect " << e;
      break;
    }
  }
  return os.str();
}

std::string print_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "config va=" << sc.cfg.n_va << " pa=" << sc.cfg.n_pa
     << " regs=" << sc.cfg.n_regs << " word=" << sc.cfg.word_bits
     << " enclaves=" << sc.cfg.max_enclaves << "\n";
  for (const Directive& d : sc.dirs) os << print_directive(d) << "\n";
  return os.str();
}

std::string scenario_text(const PlatformConfig& cfg,
                          const std::vector<Directive>& dirs) {
  return print_scenario(Scenario{cfg, dirs});
}

std::string witness_text(const PlatformConfig& cfg,
                         const std::vector<Directive>& dirs, uint64_t digest) {
  std::ostringstream os;
  os << scenario_text(cfg, dirs);
  os << "# final digest 0x" << std::hex << std::setw(16) << std::setfill('0')
     << digest << "\n";
  return os.str();
}

std::optional<uint64_t> witness_digest(const std::string& text) {
  const std::string tag = "# final digest 0x";
  size_t at = text.rfind(tag);
  if (at == std::string::npos) return std::nullopt;
  return strtoull(text.c_str() + at + tag.size(), nullptr, 16);
}

namespace {

// Splits a directive's trailing tokens into key=value fields.
struct DirectiveParser {
  Parser& p;

  bool fields(const std::vector<Token>& toks, size_t from,
              std::vector<std::pair<std::string, Token>>& kv) {
    for (size_t i = from; i < toks.size(); i++) {
      std::string key, value;
      bool has_eq;
      split_kv(toks[i], key, value, has_eq);
      if (!has_eq || key.empty() || value.empty()) {
        p.parse_fail(ScenarioError::Kind::Parse, toks[i].col,
                     "expected key=value, got '" + toks[i].text + "'");
        return false;
      }
      kv.emplace_back(key, Token{value, toks[i].col});
    }
    return true;
  }
};

}  // namespace

std::variant<Scenario, ScenarioError> parse_scenario(const std::string& text) {
  Scenario sc;
  bool have_cfg = false;
  Parser p;

  std::istringstream in(text);
  std::string raw;
  Directive::Kind last_kind = Directive::Kind::Expect;
  bool have_prev = false;

  // Forward declaration of the op-directive parser so the adversary `call`
  // arm can reuse it on the remaining tokens.
  std::function<bool(const std::vector<Token>&, size_t, Directive&)> parse_op =
      [&](const std::vector<Token>& toks, size_t at, Directive& d) -> bool {
    const std::string& name = toks[at].text;
    uint32_t ncol = toks[at].col;
    auto want_err = [&](const char* msg) {
      p.parse_fail(ScenarioError::Kind::Parse, ncol, msg);
      return false;
    };

    std::vector<std::pair<std::string, Token>> kv;
    DirectiveParser dp{p};

    auto get_num = [&](const char* key, uint64_t& out, bool required,
                       uint64_t def = 0) -> bool {
      for (auto& [k, v] : kv)
        if (k == key) return p.number(v, v.text, out);
      if (required) {
        p.parse_fail(ScenarioError::Kind::Parse, ncol,
                     std::string("missing ") + key + "=");
        return false;
      }
      out = def;
      return true;
    };
    auto get_list = [&](const char* key, std::vector<uint32_t>& out) -> bool {
      for (auto& [k, v] : kv)
        if (k == key) return p.number_list(v, v.text, out);
      return true;
    };
    auto no_unknown_keys = [&](std::initializer_list<const char*> allowed) {
      for (auto& [k, v] : kv) {
        bool ok = false;
        for (const char* a : allowed)
          if (k == a) ok = true;
        if (!ok) {
          p.parse_fail(ScenarioError::Kind::Parse, v.col,
                       "unknown field '" + k + "'");
          return false;
        }
      }
      return true;
    };

    if (name == "oswrite") {
      if (!dp.fields(toks, at + 1, kv) ||
          !no_unknown_keys({"pa", "off", "words"}))
        return false;
      d.kind = Directive::Kind::OsWrite;
      uint64_t pa, off;
      std::vector<uint32_t> words;
      if (!get_num("pa", pa, true) || !get_num("off", off, false) ||
          !get_list("words", words))
        return false;
      d.pa = PhysAddr(pa);
      d.off = uint32_t(off);
      d.words = std::move(words);
      if (uint64_t(d.pa) + d.off + d.words.size() > sc.cfg.n_pa) {
        p.parse_fail(ScenarioError::Kind::Range, ncol,
                     "oswrite window exceeds physical memory");
        return false;
      }
      for (Word w : d.words)
        if (w > sc.cfg.word_mask()) {
          p.parse_fail(ScenarioError::Kind::Range, ncol,
                       "oswrite word exceeds the word mask");
          return false;
        }
      return true;
    }
    if (name == "launch") {
      if (!dp.fields(toks, at + 1, kv) ||
          !no_unknown_keys({"id", "ep", "map", "ev", "pages"}))
        return false;
      d.kind = Directive::Kind::Launch;
      uint64_t id, ep;
      if (!get_num("id", id, true) || !get_num("ep", ep, true)) return false;
      d.launch.eid = EnclaveId{uint32_t(id)};
      d.launch.ep = VirtAddr(ep);
      for (auto& [k, v] : kv) {
        if (k != "map") continue;
        size_t i = 0;
        const std::string& s = v.text;
        while (i < s.size()) {
          size_t j = s.find(',', i);
          if (j == std::string::npos) j = s.size();
          std::string entry = s.substr(i, j - i);
          size_t c1 = entry.find(':');
          size_t c2 = c1 == std::string::npos ? std::string::npos
                                              : entry.find(':', c1 + 1);
          if (c2 == std::string::npos) {
            p.parse_fail(ScenarioError::Kind::Parse, v.col,
                         "map entry must be va:pa:perm");
            return false;
          }
          uint64_t va, pa;
          if (!p.number(v, entry.substr(0, c1), va) ||
              !p.number(v, entry.substr(c1 + 1, c2 - c1 - 1), pa))
            return false;
          LaunchArgs::Mapping m;
          m.va = VirtAddr(va);
          m.pa = PhysAddr(pa);
          if (!perm_from_string(entry.substr(c2 + 1), m.perm)) {
            p.parse_fail(ScenarioError::Kind::Parse, v.col,
                         "bad permission '" + entry.substr(c2 + 1) + "'");
            return false;
          }
          d.launch.map.push_back(m);
          i = j + 1;
        }
      }
      std::vector<uint32_t> ev, pages;
      if (!get_list("ev", ev) || !get_list("pages", pages)) return false;
      d.launch.ev.assign(ev.begin(), ev.end());
      d.launch.pages.assign(pages.begin(), pages.end());
      return true;
    }
    if (name == "enter" || name == "resume" || name == "destroy" ||
        name == "input") {
      if (!dp.fields(toks, at + 1, kv)) return false;
      if (name == "input") {
        if (!no_unknown_keys({"id", "words"})) return false;
      } else if (!no_unknown_keys({"id"})) {
        return false;
      }
      uint64_t id;
      if (!get_num("id", id, true)) return false;
      d.eid = EnclaveId{uint32_t(id)};
      if (name == "enter") d.kind = Directive::Kind::Enter;
      if (name == "resume") d.kind = Directive::Kind::Resume;
      if (name == "destroy") d.kind = Directive::Kind::Destroy;
      if (name == "input") {
        d.kind = Directive::Kind::Input;
        std::vector<uint32_t> words;
        if (!get_list("words", words)) return false;
        d.words = std::move(words);
      }
      return true;
    }
    if (name == "pause" || name == "exit" || name == "snapshot") {
      if (toks.size() > at + 1) return want_err("unexpected arguments");
      d.kind = name == "pause" ? Directive::Kind::Pause
               : name == "exit" ? Directive::Kind::Exit
                                : Directive::Kind::Snapshot;
      return true;
    }
    if (name == "step") {
      if (!dp.fields(toks, at + 1, kv) || !no_unknown_keys({"n"})) return false;
      d.kind = Directive::Kind::Step;
      uint64_t n;
      if (!get_num("n", n, false, 1)) return false;
      if (n > 100000) {
        p.parse_fail(ScenarioError::Kind::Range, ncol, "step count too large");
        return false;
      }
      d.off = uint32_t(n);  // repetition count, expanded by the caller
      return true;
    }
    if (name == "clone") {
      if (!dp.fields(toks, at + 1, kv) ||
          !no_unknown_keys({"parent", "child", "pages"}))
        return false;
      d.kind = Directive::Kind::Clone;
      uint64_t par, ch;
      if (!get_num("parent", par, true) || !get_num("child", ch, true))
        return false;
      d.clone.parent = EnclaveId{uint32_t(par)};
      d.clone.child = EnclaveId{uint32_t(ch)};
      std::vector<uint32_t> pages;
      if (!get_list("pages", pages)) return false;
      d.clone.pages.assign(pages.begin(), pages.end());
      return true;
    }
    return want_err("not an operation directive");
  };

  while (std::getline(in, raw)) {
    p.line++;
    std::vector<Token> toks = tokenize(raw);
    if (toks.empty()) continue;
    const std::string& name = toks[0].text;

    if (!have_cfg) {
      if (name != "config") {
        p.parse_fail(ScenarioError::Kind::Parse, toks[0].col,
                     "config must come first");
        return *p.err;
      }
      DirectiveParser dp{p};
      std::vector<std::pair<std::string, Token>> kv;
      if (!dp.fields(toks, 1, kv)) return *p.err;
      uint64_t va = 0, pa = 0, regs = 0, word = 0, enclaves = 4;
      bool saw_va = false, saw_pa = false, saw_regs = false, saw_word = false;
      for (auto& [k, v] : kv) {
        uint64_t n;
        if (!p.number(v, v.text, n)) return *p.err;
        if (k == "va") va = n, saw_va = true;
        else if (k == "pa") pa = n, saw_pa = true;
        else if (k == "regs") regs = n, saw_regs = true;
        else if (k == "word") word = n, saw_word = true;
        else if (k == "enclaves") enclaves = n;
        else {
          p.parse_fail(ScenarioError::Kind::Parse, v.col,
                       "unknown config field '" + k + "'");
          return *p.err;
        }
      }
      if (!saw_va || !saw_pa || !saw_regs || !saw_word) {
        p.parse_fail(ScenarioError::Kind::Parse, toks[0].col,
                     "config needs va=, pa=, regs= and word=");
        return *p.err;
      }
      sc.cfg.n_va = uint32_t(va);
      sc.cfg.n_pa = uint32_t(pa);
      sc.cfg.n_regs = uint32_t(regs);
      sc.cfg.word_bits = uint32_t(word);
      sc.cfg.max_enclaves = uint32_t(enclaves);
      if (!sc.cfg.valid()) {
        p.parse_fail(ScenarioError::Kind::Range, toks[0].col,
                     "invalid platform configuration");
        return *p.err;
      }
      have_cfg = true;
      continue;
    }

    if (name == "config") {
      p.parse_fail(ScenarioError::Kind::Parse, toks[0].col,
                   "duplicate config line");
      return *p.err;
    }

    Directive d;
    d.line = p.line;

    if (name == "expect") {
      if (toks.size() != 2) {
        p.parse_fail(ScenarioError::Kind::Parse, toks[0].col,
                     "expect takes exactly one argument");
        return *p.err;
      }
      if (!have_prev || last_kind == Directive::Kind::Expect) {
        p.parse_fail(ScenarioError::Kind::Parse, toks[0].col,
                     "expect must follow an executable directive");
        return *p.err;
      }
      std::string key, value;
      bool has_eq;
      split_kv(toks[1], key, value, has_eq);
      d.kind = Directive::Kind::Expect;
      if (!has_eq) {
        if (key != "ok" && key != "exited" && key != "snapshotted" &&
            key != "continued") {
          p.parse_fail(ScenarioError::Kind::Parse, toks[1].col,
                       "unknown expectation '" + key + "'");
          return *p.err;
        }
        d.expect = key;
      } else if (key == "err") {
        Err e;
        if (!err_from_name(value, e)) {
          p.parse_fail(ScenarioError::Kind::Parse, toks[1].col,
                       "unknown error '" + value + "'");
          return *p.err;
        }
        d.expect = "err:" + value;
      } else if (key == "fault") {
        StepFault f;
        if (!fault_from_name(value, f)) {
          p.parse_fail(ScenarioError::Kind::Parse, toks[1].col,
                       "unknown fault '" + value + "'");
          return *p.err;
        }
        d.expect = "fault:" + value;
      } else if (key == "output") {
        uint64_t n;
        if (!p.number(toks[1], value, n)) return *p.err;
        d.expect = "output:" + std::to_string(n);
      } else {
        p.parse_fail(ScenarioError::Kind::Parse, toks[1].col,
                     "unknown expectation '" + key + "'");
        return *p.err;
      }
      sc.dirs.push_back(std::move(d));
      last_kind = Directive::Kind::Expect;
      continue;
    }

    if (name == "adversary") {
      d.kind = Directive::Kind::Adversary;
      size_t at = 1;
      if (at < toks.size() && toks[at].text.rfind("protected=", 0) == 0) {
        uint64_t id;
        if (!p.number(toks[at], toks[at].text.substr(10), id)) return *p.err;
        d.adv.protected_eid = EnclaveId{uint32_t(id)};
        at++;
      }
      if (at >= toks.size()) {
        p.parse_fail(ScenarioError::Kind::Parse, toks[0].col,
                     "adversary needs a subcommand");
        return *p.err;
      }
      const std::string& sub = toks[at].text;
      if (sub == "tamper" || sub == "pagetable") {
        DirectiveParser dp{p};
        std::vector<std::pair<std::string, Token>> kv;
        if (!dp.fields(toks, at + 1, kv)) return *p.err;
        auto get = [&](const char* key, uint64_t& out) -> bool {
          for (auto& [k, v] : kv)
            if (k == key) return p.number(v, v.text, out);
          p.parse_fail(ScenarioError::Kind::Parse, toks[at].col,
                       std::string("missing ") + key + "=");
          return false;
        };
        if (sub == "tamper") {
          uint64_t pa, value;
          if (!get("pa", pa) || !get("value", value)) return *p.err;
          for (auto& [k, v] : kv)
            if (k != "pa" && k != "value") {
              p.parse_fail(ScenarioError::Kind::Parse, v.col,
                           "unknown field '" + k + "'");
              return *p.err;
            }
          d.adv.act = AdversaryAction::tamper_mem(PhysAddr(pa), Word(value));
        } else {
          uint64_t va, pa;
          Perm perm;
          if (!get("va", va) || !get("pa", pa)) return *p.err;
          bool saw_perm = false;
          for (auto& [k, v] : kv) {
            if (k == "perm") {
              saw_perm = true;
              if (!perm_from_string(v.text, perm)) {
                p.parse_fail(ScenarioError::Kind::Parse, v.col,
                             "bad permission '" + v.text + "'");
                return *p.err;
              }
            } else if (k != "va" && k != "pa") {
              p.parse_fail(ScenarioError::Kind::Parse, v.col,
                           "unknown field '" + k + "'");
              return *p.err;
            }
          }
          if (!saw_perm) {
            p.parse_fail(ScenarioError::Kind::Parse, toks[at].col,
                         "missing perm=");
            return *p.err;
          }
          d.adv.act =
              AdversaryAction::tamper_page_table(VirtAddr(va), PhysAddr(pa), perm);
        }
      } else if (sub == "observe") {
        if (toks.size() > at + 1) {
          p.parse_fail(ScenarioError::Kind::Parse, toks[at + 1].col,
                       "unexpected arguments");
          return *p.err;
        }
        d.adv.act = AdversaryAction::observe_now();
      } else if (sub == "call") {
        if (at + 1 >= toks.size()) {
          p.parse_fail(ScenarioError::Kind::Parse, toks[at].col,
                       "call needs an operation directive");
          return *p.err;
        }
        Directive inner;
        if (!parse_op(toks, at + 1, inner)) return *p.err;
        if (inner.kind == Directive::Kind::Step && inner.off != 1) {
          p.parse_fail(ScenarioError::Kind::Parse, toks[at + 1].col,
                       "call wraps a single step");
          return *p.err;
        }
        auto act = op_action(inner);
        if (!act) {
          p.parse_fail(ScenarioError::Kind::Parse, toks[at + 1].col,
                       "call wraps platform operations only");
          return *p.err;
        }
        d.adv.act = AdversaryAction::call_op(std::move(*act));
      } else {
        p.parse_fail(ScenarioError::Kind::UnknownDirective, toks[at].col,
                     "unknown adversary subcommand '" + sub + "'");
        return *p.err;
      }
      sc.dirs.push_back(std::move(d));
      last_kind = Directive::Kind::Adversary;
      have_prev = true;
      continue;
    }

    if (name == "oswrite" || name == "launch" || name == "enter" ||
        name == "resume" || name == "pause" || name == "exit" ||
        name == "snapshot" || name == "clone" || name == "destroy" ||
        name == "step" || name == "input") {
      if (!parse_op(toks, 0, d)) return *p.err;
      if (d.kind == Directive::Kind::Step) {
        uint32_t n = d.off;
        d.off = 0;
        for (uint32_t k = 0; k < n; k++) sc.dirs.push_back(d);
        if (n > 0) {
          last_kind = Directive::Kind::Step;
          have_prev = true;
        }
        continue;
      }
      sc.dirs.push_back(std::move(d));
      last_kind = sc.dirs.back().kind;
      have_prev = true;
      continue;
    }

    p.parse_fail(ScenarioError::Kind::UnknownDirective, toks[0].col,
                 "unknown directive '" + name + "'");
    return *p.err;
  }

  if (!have_cfg) {
    p.parse_fail(ScenarioError::Kind::Parse, 1, "empty scenario: no config");
    return *p.err;
  }
  if (p.err) return *p.err;
  return sc;
}

ScenarioRun run_scenario(const Scenario& sc) {
  ScenarioRun run;
  PlatformState st = initial_state(sc.cfg);
  std::string last_result = "ok";

  for (size_t i = 0; i < sc.dirs.size(); i++) {
    const Directive& d = sc.dirs[i];
    std::string result;

    switch (d.kind) {
      case Directive::Kind::OsWrite: {
        OpResult r = OpResult::success();
        for (size_t k = 0; k < d.words.size(); k++) {
          r = adversary_execute(
              st, EnclaveId::invalid(),
              AdversaryAction::tamper_mem(d.pa + d.off + PhysAddr(k),
                                          d.words[k]));
          if (!r.ok()) break;
        }
        result = result_to_string(r);
        break;
      }
      case Directive::Kind::Input: {
        bool good = is_valid(d.eid) && st.in_range(d.eid);
        for (Word w : d.words)
          if (w > st.cfg.word_mask()) good = false;
        if (good) {
          auto& tape = st.input[d.eid.raw].words;
          tape.insert(tape.end(), d.words.begin(), d.words.end());
          result = "ok";
        } else {
          result = std::string("err:") + err_name(Err::BadArguments);
        }
        break;
      }
      case Directive::Kind::Expect: {
        if (last_result != d.expect) {
          run.ok = false;
          run.failed_step = i;
          std::ostringstream os;
          os << "line " << d.line << ": expected " << d.expect << ", got "
             << last_result;
          run.error = os.str();
          run.trace.push_back(TraceRecord{i, print_directive(d),
                                          "mismatch:" + last_result,
                                          state_digest(st)});
          run.final_state = std::move(st);
          return run;
        }
        result = last_result;
        break;
      }
      default: {
        OpResult r = apply_mut(st, *op_action(d));
        result = result_to_string(r);
        break;
      }
    }

    if (d.kind != Directive::Kind::Expect) last_result = result;
    run.trace.push_back(
        TraceRecord{i, print_directive(d), result, state_digest(st)});
  }
  run.final_state = std::move(st);
  return run;
}

}  // namespace tapc
