#include <algorithm>
#include <map>
#include <set>

#include "pass_util.hpp"

namespace obfdetect::obf {

using namespace mir;
using detail::imm;

namespace {

class Flattener {
 public:
  Flattener(const Function& f, PassContext& ctx, Construction c)
      : f_(f), ctx_(ctx), ifnest_(c == Construction::IfnestBased), next_id_(f.fresh_block_id()) {}

  Function run() {
    auto free = detail::unreferenced_general(f_, ctx_);
    if (free.size() < 2) throw PassError("flatten needs two unused registers in '" + f_.name + "'");
    state_ = free[0];
    cmp_ = free[1];

    std::set<std::uint64_t> used;
    for (const auto& b : f_.blocks) {
      std::uint64_t v;
      do {
        v = ctx_.below(1u << 16);
      } while (!used.insert(v).second);
      states_[b.id] = v;
    }

    const BlockId entry = fresh();
    dispatcher_ = fresh();

    std::vector<BasicBlock> body;
    for (const auto& b : f_.blocks) body.push_back(rewrite(b));
    std::vector<BasicBlock> disp = dispatcher();

    BasicBlock e;
    e.id = entry;
    e.instrs.push_back(make_const(state_, states_.at(f_.entry_block)));
    e.term = Terminator::jump(dispatcher_);

    std::vector<BasicBlock> rest = std::move(body);
    rest.insert(rest.end(), extra_.begin(), extra_.end());
    rest.insert(rest.end(), disp.begin(), disp.end());
    ctx_.shuffle(rest);

    Function out;
    out.name = f_.name;
    out.params = f_.params;
    out.functionality_tag = f_.functionality_tag;
    out.entry_block = entry;
    out.blocks.push_back(std::move(e));
    out.blocks.insert(out.blocks.end(), rest.begin(), rest.end());
    return out;
  }

 private:
  BlockId fresh() { return next_id_++; }

  // Block that selects `target` and returns to the dispatcher.
  BlockId trampoline(BlockId target) {
    BasicBlock t;
    t.id = fresh();
    t.instrs.push_back(make_const(state_, states_.at(target)));
    t.term = Terminator::jump(dispatcher_);
    extra_.push_back(std::move(t));
    return extra_.back().id;
  }

  BasicBlock rewrite(const BasicBlock& b) {
    BasicBlock out = b;
    const Terminator& t = b.term;
    switch (t.kind) {
      case Terminator::Kind::Ret:
        break;
      case Terminator::Kind::Jump:
        out.instrs.push_back(make_const(state_, states_.at(t.targets[0])));
        out.term = Terminator::jump(dispatcher_);
        break;
      case Terminator::Kind::Branch:
        out.term = Terminator::branch(t.reg, trampoline(t.targets[0]), trampoline(t.targets[1]));
        break;
      case Terminator::Kind::Switch:
        if (ifnest_) {
          out.term = Terminator::jump(lower_switch(t));
        } else {
          std::vector<BlockId> cases;
          for (std::size_t i = 0; i + 1 < t.targets.size(); ++i) cases.push_back(trampoline(t.targets[i]));
          out.term = Terminator::switch_on(t.reg, t.case_values, cases, trampoline(t.default_target()));
        }
        break;
    }
    return out;
  }

  // Chain of equality tests replacing a switch terminator.
  BlockId lower_switch(const Terminator& t) {
    BlockId next = trampoline(t.default_target());
    for (std::size_t i = t.case_values.size(); i-- > 0;) {
      BasicBlock test;
      test.id = fresh();
      test.instrs.push_back(make_binary(Opcode::CmpEq, cmp_, t.reg, imm(t.case_values[i])));
      test.term = Terminator::branch(cmp_, trampoline(t.targets[i]), next);
      next = test.id;
      extra_.push_back(std::move(test));
    }
    return next;
  }

  std::vector<BasicBlock> dispatcher() {
    std::vector<std::pair<std::uint64_t, BlockId>> order;
    for (const auto& [id, v] : states_) order.emplace_back(v, id);
    std::sort(order.begin(), order.end());
    std::vector<BasicBlock> out;
    if (!ifnest_) {
      BasicBlock d;
      d.id = dispatcher_;
      std::vector<std::uint64_t> values;
      std::vector<BlockId> targets;
      for (const auto& [v, id] : order) {
        values.push_back(v);
        targets.push_back(id);
      }
      d.term = Terminator::switch_on(state_, values, targets, f_.entry_block);
      out.push_back(std::move(d));
      return out;
    }
    build_nest(order, 0, order.size(), dispatcher_, out);
    return out;
  }

  // Balanced comparison tree over order[lo, hi); `id` names the subtree root.
  void build_nest(const std::vector<std::pair<std::uint64_t, BlockId>>& order, std::size_t lo,
                  std::size_t hi, BlockId id, std::vector<BasicBlock>& out) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    auto child = [&](std::size_t a, std::size_t b) {
      if (b - a == 1) return order[a].second;
      const BlockId c = fresh();
      build_nest(order, a, b, c, out);
      return c;
    };
    BasicBlock node;
    node.id = id;
    node.instrs.push_back(make_binary(Opcode::CmpLt, cmp_, state_, imm(order[mid].first)));
    const BlockId left = child(lo, mid);
    const BlockId right = child(mid, hi);
    node.term = Terminator::branch(cmp_, left, right);
    out.push_back(std::move(node));
  }

  const Function& f_;
  PassContext& ctx_;
  bool ifnest_;
  BlockId next_id_;
  BlockId dispatcher_ = 0;
  Reg state_ = Reg::R0, cmp_ = Reg::R0;
  std::map<BlockId, std::uint64_t> states_;
  std::vector<BasicBlock> extra_;
};

}  // namespace

Function flatten(const Function& f, PassContext& ctx, Construction construction) {
  if (construction == Construction::Default) construction = Construction::SwitchBased;
  if (!construction_valid_for(TransformLabel::Flat, construction)) {
    throw UnsupportedConstruction("Flat construction '" + std::string(construction_name(construction)) +
                                  "'");
  }
  if (f.blocks.size() < 3) throw TooSmall("function '" + f.name + "' has fewer than 3 blocks");
  return Flattener(f, ctx, construction).run();
}

}  // namespace obfdetect::obf
