#include "obfdetect/mir_text.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace obfdetect::mir {

namespace {

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string print_operand(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Imm:
      return hex(o.imm);
    case Operand::Kind::Reg:
      return std::string(reg_name(o.reg));
    case Operand::Kind::Mem: {
      std::string s = "[" + std::string(reg_name(o.reg));
      if (o.offset > 0) s += "+" + std::to_string(o.offset);
      if (o.offset < 0) s += std::to_string(o.offset);
      return s + "]";
    }
  }
  return {};
}

}  // namespace

std::string print_instruction(const Instruction& in) {
  std::string s(opcode_name(in.op));
  std::vector<std::string> parts;
  if (in.op != Opcode::Push) parts.push_back(print_operand(Operand(in.dst)));
  for (const auto& o : in.srcs) parts.push_back(print_operand(o));
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i == 0 ? " " : ", ") + parts[i];
  return s;
}

std::string print_terminator(const Terminator& t) {
  switch (t.kind) {
    case Terminator::Kind::Jump:
      return "jump " + std::to_string(t.targets[0]);
    case Terminator::Kind::Branch:
      return "branch " + std::string(reg_name(t.reg)) + ", " + std::to_string(t.targets[0]) +
             ", " + std::to_string(t.targets[1]);
    case Terminator::Kind::Switch: {
      std::string s = "switch " + std::string(reg_name(t.reg)) + ", default " +
                      std::to_string(t.default_target());
      for (std::size_t i = 0; i < t.case_values.size(); ++i) {
        s += ", " + hex(t.case_values[i]) + " -> " + std::to_string(t.targets[i]);
      }
      return s;
    }
    case Terminator::Kind::Ret:
      return "ret " + std::string(reg_name(t.reg));
  }
  return {};
}

std::string print_function(const Function& f) {
  std::string out = "func " + f.name + "(";
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    if (i) out += ", ";
    out += reg_name(f.params[i]);
  }
  out += ")";
  if (!f.functionality_tag.empty()) out += " tag=" + f.functionality_tag;
  out += " entry=" + std::to_string(f.entry_block) + "\n";
  for (const auto& b : f.blocks) {
    out += "block " + std::to_string(b.id) + ":\n";
    for (const auto& in : b.instrs) out += "  " + print_instruction(in) + "\n";
    out += "  " + print_terminator(b.term) + "\n";
  }
  return out;
}

std::string print_program(const Program& p) {
  std::string out = "program entry=" + p.entry + "\n";
  for (const auto& f : p.functions) out += print_function(f);
  return out;
}

namespace {

class LineCursor {
 public:
  LineCursor(std::string_view s, int line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  bool accept(std::string_view lit) {
    skip_ws();
    if (s_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }
  void expect(std::string_view lit) {
    if (!accept(lit)) fail("expected '" + std::string(lit) + "'");
  }
  std::string_view word() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || c == ',' || c == '(' || c == ')' || c == ':' || c == '[' ||
          c == ']' || c == '+' || c == '-' || c == '=') {
        break;
      }
      ++pos_;
    }
    if (start == pos_) fail("expected a word");
    return s_.substr(start, pos_ - start);
  }
  std::string_view rest() {
    skip_ws();
    auto r = s_.substr(pos_);
    pos_ = s_.size();
    return r;
  }
  std::uint64_t number() {
    auto w = word();
    std::uint64_t v = 0;
    int base = 10;
    if (w.size() > 2 && w[0] == '0' && (w[1] == 'x' || w[1] == 'X')) {
      w.remove_prefix(2);
      base = 16;
    }
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v, base);
    if (ec != std::errc() || p != w.data() + w.size()) fail("bad number '" + std::string(w) + "'");
    return v;
  }
  Reg reg() {
    auto w = word();
    auto r = parse_reg(w);
    if (!r) fail("unknown register '" + std::string(w) + "'");
    return *r;
  }
  Operand operand() {
    skip_ws();
    if (accept("[")) {
      Reg base = reg();
      std::int64_t off = 0;
      if (accept("+")) {
        off = static_cast<std::int64_t>(number());
      } else if (accept("-")) {
        off = -static_cast<std::int64_t>(number());
      }
      expect("]");
      return Operand(Location::mem(base, off));
    }
    if (pos_ < s_.size() && (s_[pos_] >= '0' && s_[pos_] <= '9')) {
      return Operand::immediate(number());
    }
    return Operand(reg());
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

Terminator parse_terminator(std::string_view kw, LineCursor& c) {
  if (kw == "jump") return Terminator::jump(static_cast<BlockId>(c.number()));
  if (kw == "ret") return Terminator::ret(c.reg());
  if (kw == "branch") {
    Reg r = c.reg();
    c.expect(",");
    auto t = static_cast<BlockId>(c.number());
    c.expect(",");
    auto e = static_cast<BlockId>(c.number());
    return Terminator::branch(r, t, e);
  }
  // switch
  Reg r = c.reg();
  c.expect(",");
  c.expect("default");
  auto def = static_cast<BlockId>(c.number());
  std::vector<std::uint64_t> values;
  std::vector<BlockId> targets;
  while (c.accept(",")) {
    values.push_back(c.number());
    c.expect("->");
    targets.push_back(static_cast<BlockId>(c.number()));
  }
  return Terminator::switch_on(r, std::move(values), std::move(targets), def);
}

bool is_terminator_keyword(std::string_view w) {
  return w == "jump" || w == "branch" || w == "switch" || w == "ret";
}

struct FunctionParser {
  std::vector<Function> functions;
  std::string program_entry;
  bool saw_program = false;
  bool block_open = false;  // a block header was read and its terminator not yet

  void header(LineCursor& c) {
    Function f;
    f.name = std::string(c.word());
    c.expect("(");
    if (!c.accept(")")) {
      do {
        f.params.push_back(c.reg());
      } while (c.accept(","));
      c.expect(")");
    }
    if (c.accept("tag=")) f.functionality_tag = std::string(c.word());
    c.expect("entry=");
    f.entry_block = static_cast<BlockId>(c.number());
    if (!c.done()) c.fail("trailing text after function header");
    functions.push_back(std::move(f));
  }

  void line(std::string_view text, int lineno) {
    if (auto hash = text.find(';'); hash != std::string_view::npos) text = text.substr(0, hash);
    LineCursor c(text, lineno);
    if (c.done()) return;
    if (c.accept("program")) {
      c.expect("entry=");
      program_entry = std::string(c.word());
      saw_program = true;
      return;
    }
    if (c.accept("func ")) {
      if (block_open) c.fail("block without terminator");
      header(c);
      return;
    }
    if (functions.empty()) c.fail("instruction outside a function");
    Function& f = functions.back();
    auto kw = c.word();
    if (kw == "block") {
      if (block_open) c.fail("block without terminator");
      BasicBlock b;
      b.id = static_cast<BlockId>(c.number());
      c.expect(":");
      f.blocks.push_back(std::move(b));
      block_open = true;
      return;
    }
    if (!block_open) c.fail("instruction outside a block");
    BasicBlock& b = f.blocks.back();
    if (is_terminator_keyword(kw)) {
      b.term = parse_terminator(kw, c);
      block_open = false;
    } else {
      auto op = parse_opcode(kw);
      if (!op) c.fail("unknown opcode '" + std::string(kw) + "'");
      Instruction in;
      in.op = *op;
      if (*op == Opcode::Push) {
        in.dst = Location::of(Reg::SP);
      } else {
        in.dst = c.operand().location();
      }
      const int arity = opcode_arity(*op);
      for (int i = 0; i < arity; ++i) {
        if (i > 0 || *op != Opcode::Push) c.expect(",");
        in.srcs.push_back(c.operand());
      }
      b.instrs.push_back(std::move(in));
    }
    if (!c.done()) c.fail("trailing text");
  }

  void parse(std::string_view text) {
    int lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++lineno;
      line(text.substr(start, end - start), lineno);
      start = end + 1;
    }
    if (block_open) throw ParseError(lineno, "block without terminator at end of input");
  }
};

}  // namespace

Function parse_function(std::string_view text) {
  FunctionParser p;
  p.parse(text);
  if (p.functions.size() != 1) {
    throw ParseError(1, "expected exactly one function, found " + std::to_string(p.functions.size()));
  }
  return std::move(p.functions.front());
}

Program parse_program(std::string_view text) {
  FunctionParser p;
  p.parse(text);
  if (!p.saw_program) throw ParseError(1, "missing 'program entry=' line");
  return Program{std::move(p.functions), p.program_entry};
}

}  // namespace obfdetect::mir
