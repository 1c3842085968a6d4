# %% [markdown]
# # How private actions move knowledge around
#
# A pool of three agents over two propositions. Agent 0 sets `p` without
# anybody watching; agents 1 and 2 start out knowing that `p` is false.

# %%
from pathlib import Path

from kepal import parse_system, explore
from kepal.checker import Checker
from kepal.epistemic import format_relation
from kepal.formulas import And, Know, Not, Prop

SPECS = Path(__file__).resolve().parent.parent / "specs"
spec = parse_system((SPECS / "forgetting.kpa").read_text())
g = explore(spec)
names = spec.props.names

for s, st in enumerate(g.states):
    print(f"state {s}")
    for agent, rel in zip(st.ids, st.relations):
        print(f"  agent {agent}: {format_relation(rel, names)}")

# %% [markdown]
# The setter now knows `p`. The two observers have forgotten it, even though
# agent 1 still tells `q` worlds apart.

# %%
c = Checker(g)
p, q = Prop(0), Prop(1)
for label, f in [("K0 p", Know(0, p)), ("K1 p", Know(1, p)), ("K1 !p", Know(1, Not(p))),
                 ("K1 q", Know(1, q)), ("K2 !p", Know(2, Not(p)))]:
    print(f"{label:6} before={c.check(0, f)!s:5} after={c.check(1, f)}")

# %% [markdown]
# Communication refines only the receiver's relation. Telling agent 1
# "p holds and you do not know it" is truthful, yet it stops being true the
# moment it is received.

# %%
spec = parse_system((SPECS / "unsuccessful.kpa").read_text())
g = explore(spec)
c = Checker(g)
psi = And(p, Not(Know(1, p)))
print("before: psi =", c.check(0, psi), " K1 psi =", c.check(0, Know(1, psi)))
print("after:  psi =", c.check(1, psi), " K1 p =", c.check(1, Know(1, p)), " K1 psi =", c.check(1, Know(1, psi)))
