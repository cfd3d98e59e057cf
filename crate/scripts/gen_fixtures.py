"""Regenerate the FCIDUMP / occupancy fixtures under crates/core/tests/data.

Requires pyscf. Each system is written as:
  <name>.fcidump      integrals in the MO basis of a converged RHF
  <name>.occ          MP2 natural-orbital occupations projected on the MOs,
                      one line per spatial orbital: "<alpha> <beta>"
and a summary of reference energies goes to reference_energies.json.
"""

import json
import os

import numpy as np
from pyscf import fci, gto, mp, scf
from pyscf.tools import fcidump

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "data")


def chain(n, spacing):
    return [("H", (0.0, 0.0, i * spacing)) for i in range(n)]


def ring(n, radius):
    atoms = []
    for i in range(n):
        t = 2.0 * np.pi * i / n
        atoms.append(("H", (radius * np.cos(t), radius * np.sin(t), 0.0)))
    return atoms


SYSTEMS = {
    "h2_sto3g": chain(2, 0.7414),
    "h4_chain_sto3g": chain(4, 1.0),
    "h6_ring_sto3g": ring(6, 1.2),
    "h6_stretched_sto3g": chain(6, 1.6),
    "h8_chain_sto3g": chain(8, 1.2),
}


def main():
    os.makedirs(OUT, exist_ok=True)
    refs = {}
    for name, atoms in SYSTEMS.items():
        mol = gto.M(atom=atoms, basis="sto-3g", unit="Angstrom", verbose=0)
        mf = scf.RHF(mol).run()
        path = os.path.join(OUT, name + ".fcidump")
        fcidump.from_scf(mf, path, tol=1e-14)

        pt = mp.MP2(mf).run()
        dm1 = pt.make_rdm1()  # spin-summed, MO basis
        occ = np.clip(np.diag(dm1) / 2.0, 0.0, 1.0)
        with open(os.path.join(OUT, name + ".occ"), "w") as f:
            for n in occ:
                f.write(f"{n:.12f} {n:.12f}\n")

        cis = fci.FCI(mf)
        e_fci = cis.kernel()[0]
        refs[name] = {
            "n_orb": int(mol.nao),
            "n_elec": int(mol.nelectron),
            "e_hf": float(mf.e_tot),
            "e_mp2": float(pt.e_tot),
            "e_fci": float(e_fci),
        }
    with open(os.path.join(OUT, "reference_energies.json"), "w") as f:
        json.dump(refs, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
