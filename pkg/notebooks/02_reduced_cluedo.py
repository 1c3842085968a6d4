# %% [markdown]
# # A small Cluedo game
#
# Four cards, two players with one card each and two secret cards. The
# dealer deals, announces the rules, and then the players take turns asking.

# %%
import time

from kepal import parse_system, explore, parse_formula
from kepal.checker import Checker
from kepal.cluedo import CluedoConfig, count_deal_branches, deal_count_closed_form, generate

cfg = CluedoConfig(cards=4, players=2, hand=1, secret=2)
spec = parse_system(generate(cfg))
print("propositions:", len(spec.props))
print("deals:", count_deal_branches(spec), "closed form:", deal_count_closed_form(cfg))

t = time.perf_counter()
g = explore(spec)
print(f"{len(g.states)} states, {len(g.transitions)} transitions in {time.perf_counter() - t:.2f}s")

# %% [markdown]
# Some run lets a player learn the secret, and some run goes on forever
# without anyone learning it. The second verdict comes with a lasso.

# %%
c = Checker(g)
for text in ["F (phi_0 | phi_1)", "G (!phi_0 & !phi_1)"]:
    f = parse_formula(text, spec)
    w = c.witness(g.root, f)
    print(f"{text:22} {w.verdict}  {w.kind}: trace of {len(w.trace)} states, cycle of {len(w.cycle)}")

# %% [markdown]
# The full game size from the literature is still countable syntactically,
# though its 32 propositions are far beyond what the explorer enumerates.

# %%
big = CluedoConfig(8, 3, 2, 2)
print("8-card deals:", count_deal_branches(parse_system(generate(big), check_cap=False)))
