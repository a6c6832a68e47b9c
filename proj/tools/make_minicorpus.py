#!/usr/bin/env python3
"""Generate the bundled 200-document mini-corpus (data/minicorpus/corpus.jsonl).

Documents are synthetic glass-science abstracts drawn from six themes with
distinct vocabularies, so topic recovery, element overlays and caption labels
have something real to find. Output is fully determined by --seed.
"""

import argparse
import json
import random
from pathlib import Path

THEMES = {
    "bioactive": {
        "sentences": [
            "Bioactive glasses in the {sys} system were prepared by melt quenching.",
            "Apatite formation was followed after immersion in simulated body fluid for up to 28 days.",
            "Partial substitution of {f} for CaO increased the rate of hydroxyapatite precipitation.",
            "Fluoride release and ion dissolution were measured in Tris buffer.",
            "Chloride containing compositions dissolved faster and formed carbonated apatite.",
            "Cell viability and osteoblast proliferation were assessed on the glass surface.",
            "The bioactivity of the scaffolds depends on the network connectivity of the silicate glass.",
            "Dental applications require controlled fluoride release from the remineralising glass.",
            "Sol-gel derived bioactive glass particles showed high specific surface area.",
        ],
        "fills": {"sys": ["SiO2-CaO-Na2O-P2O5", "SiO2-CaO-P2O5", "SiO2-Na2O-CaO-P2O5-CaF2"],
                  "f": ["CaF2", "CaCl2", "NaF", "CaF2 and CaCl2"]},
        "captions": [
            "SEM micrograph of the glass surface after immersion in SBF for {d} days",
            "XRD patterns of bioactive glass powders after immersion in simulated body fluid",
            "FTIR spectra showing apatite formation on the glass surface",
            "Fluoride release profiles of the glasses in Tris buffer",
            "Cell viability of osteoblasts cultured on bioactive glass discs",
            "EDX analysis of the calcium phosphate layer formed in SBF",
        ],
    },
    "rare-earth": {
        "sentences": [
            "{re}-doped {host} glasses were synthesised for photonic applications.",
            "Photoluminescence emission spectra were recorded under 980 nm excitation.",
            "Upconversion luminescence in the green and red bands was observed from the erbium ions.",
            "Judd-Ofelt intensity parameters were derived from the absorption spectra.",
            "The fluorescence lifetime decreased with increasing {re} concentration due to quenching.",
            "Energy transfer between ytterbium and erbium ions enhanced the upconversion intensity.",
            "Optical band gap and refractive index were obtained from the absorption edge.",
            "Europium emission showed strong red luminescence suitable for lighting phosphors.",
        ],
        "fills": {"re": ["Er3+", "Yb3+/Er3+", "Eu3+", "Nd3+", "Tm3+"],
                  "host": ["TeO2-ZnO", "tellurite", "fluorophosphate", "borate", "germanate"]},
        "captions": [
            "Photoluminescence emission spectra of {re} doped glasses under 980 nm excitation",
            "Absorption spectra of the rare earth doped glasses",
            "Upconversion emission intensity as a function of pump power",
            "Fluorescence decay curves of the erbium emission",
            "PLE spectra monitored at the europium emission",
            "Energy level diagram showing upconversion mechanism",
        ],
    },
    "conducting-films": {
        "sentences": [
            "Indium tin oxide films were deposited by magnetron sputtering on glass substrates.",
            "ITO coatings showed sheet resistance below 20 ohm and visible transmittance above 85 percent.",
            "Fluorine doped tin oxide films were compared with {tco} electrodes.",
            "Post deposition annealing in vacuum improved carrier mobility of the films.",
            "Surface roughness of the transparent electrodes was measured by atomic force microscopy.",
            "The figure of merit of the transparent conducting oxide depends on film thickness.",
            "Hall effect measurements gave the carrier concentration of the {tco} layers.",
        ],
        "fills": {"tco": ["ITO", "AZO", "In2O3", "SnO2", "FTO"]},
        "captions": [
            "AFM images of the sputtered films surface roughness",
            "Optical transmittance spectra of the ITO films on glass",
            "Sheet resistance of the films as a function of annealing temperature",
            "XRD patterns of the sputtered tin oxide films",
            "SEM cross section of the transparent electrode film",
            "Hall mobility and carrier concentration of the films",
        ],
    },
    "glass-ceramics": {
        "sentences": [
            "Glass-ceramics in the {gc} system were produced by controlled nucleation and crystallization.",
            "Crystallization kinetics were studied by differential scanning calorimetry at several heating rates.",
            "The activation energy for crystal growth was obtained from the Kissinger analysis.",
            "{nuc} acted as nucleating agent and promoted bulk crystallization.",
            "The glass transition temperature increased with alumina content.",
            "Solid state synthesis of the crystalline reference phases confirmed the phase assignment.",
            "Two step heat treatment produced nanocrystals of lithium disilicate.",
            "Viscosity measurements near the glass transition were fitted with the VFT equation.",
        ],
        "fills": {"gc": ["Li2O-Al2O3-SiO2", "MgO-Al2O3-SiO2", "Li2O-SiO2", "ZnO-Al2O3-SiO2"],
                  "nuc": ["TiO2", "ZrO2", "P2O5", "TiO2 and ZrO2"]},
        "captions": [
            "DSC curves of the parent glass at different heating rates",
            "XRD patterns of glass-ceramics after heat treatment at {t} C",
            "TEM image of nanocrystals in the glass-ceramic",
            "Kissinger plot for the crystallization activation energy",
            "DTA traces of the glasses showing crystallization peaks",
            "Viscosity of the melt as a function of temperature",
        ],
    },
    "mechanical": {
        "sentences": [
            "Vickers hardness and fracture toughness were measured by indentation on {mg} glass.",
            "Chemical strengthening by ion exchange in molten KNO3 increased flexural strength.",
            "Crack initiation load depended on the densification of the glass network under the indenter.",
            "Elastic moduli were determined from ultrasonic velocities.",
            "Compressive stress profiles after ion exchange were measured by surface stress metre.",
            "Brittleness decreased as the Poisson ratio of the glass increased.",
            "Scratch resistance of the cover glass was evaluated with a diamond stylus.",
        ],
        "fills": {"mg": ["aluminosilicate", "soda-lime silicate", "boroaluminosilicate", "Na2O-Al2O3-SiO2"]},
        "captions": [
            "Vickers hardness as a function of load",
            "Fracture surface of the strengthened glass after bending",
            "Crack patterns around Vickers indents",
            "Stress-strain curves of the glass fibres",
            "Flexural strength distribution after ion exchange",
            "Elastic modulus versus alumina content",
        ],
    },
    "nuclear": {
        "sentences": [
            "Borosilicate glasses for immobilisation of high level nuclear waste were doped with {act}.",
            "The dissolution rate of the waste glass was measured in static leaching tests.",
            "Americium and plutonium surrogates such as {sur} were used to study actinide solubility.",
            "Alpha decay damage from 241Am doping caused swelling and changes in hardness.",
            "Vitrification of the waste stream produced a homogeneous glass without crystalline inclusions.",
            "Radiation damage was simulated by heavy ion irradiation of the glass.",
        ],
        "fills": {"act": ["americium", "plutonium", "PuO2", "UO2", "241Am"],
                  "sur": ["CeO2", "Nd2O3", "HfO2"]},
        "captions": [
            "Normalised mass loss of boron from the waste glass in leaching tests",
            "Raman spectra of irradiated borosilicate glasses",
            "Swelling of americium doped glass as a function of alpha dose",
            "SEM image of the altered layer after leaching",
            "NMR spectra of boron coordination in the waste glass",
        ],
    },
}

SAMPLES = {
    "bioactive": ["45S5 glass", "fluoride glass", "chloride glass", "strontium substituted glass",
                  "sol-gel glass", "mesoporous glass", "borate glass", "phosphate glass"],
    "rare-earth": ["tellurite host", "germanate host", "fluorophosphate host", "borate host",
                   "codoped sample", "undoped reference", "heavily doped sample", "oxyfluoride host"],
    "conducting-films": ["thin film", "thick film", "bilayer film", "multilayer stack",
                         "flexible substrate", "quartz substrate", "textured film", "amorphous film"],
    "glass-ceramics": ["parent glass", "nucleated glass", "lithium silicate", "cordierite composition",
                       "spinel composition", "opaque sample", "transparent sample", "bulk sample"],
    "mechanical": ["float glass", "cover glass", "fibre bundle", "annealed plate",
                   "tempered plate", "thin sheet", "rod sample", "laminated sample"],
    "nuclear": ["simulant glass", "reference glass", "doped monolith", "powdered glass",
                "altered coupon", "irradiated coupon", "pristine coupon", "crushed sample"],
}

CONDITIONS = ["as quenched", "after polishing", "before testing", "in air", "under nitrogen",
              "at room temperature", "after ageing", "series B"]

GENERIC_CAPTIONS = [
    "Schematic of the experimental setup used for glass melting",
    "Density and molar volume of the glasses versus composition",
    "Photograph of the glass samples",
]


def fill(template, fills, rng):
    out = template
    for key, choices in fills.items():
        token = "{" + key + "}"
        while token in out:
            out = out.replace(token, rng.choice(choices), 1)
    out = out.replace("{d}", str(rng.choice([1, 3, 7, 14, 28])))
    out = out.replace("{t}", str(rng.choice([650, 700, 750, 800, 850])))
    return out


def make_document(i, theme, rng):
    spec = THEMES[theme]
    k = rng.randint(4, 6)
    sentences = [fill(s, spec["fills"], rng) for s in rng.sample(spec["sentences"], k)]
    # Occasional cross-theme sentence keeps topics overlapping a little.
    if rng.random() < 0.25:
        other = THEMES[rng.choice([t for t in THEMES if t != theme])]
        sentences.insert(rng.randrange(len(sentences) + 1), fill(rng.choice(other["sentences"]), other["fills"], rng))
    n_caps = rng.choice([1, 2, 2, 3])
    pool = list(spec["captions"])
    if rng.random() < 0.2:
        pool[rng.randrange(len(pool))] = rng.choice(GENERIC_CAPTIONS)
    captions = [f"{fill(c, spec['fills'], rng)} ({rng.choice(SAMPLES[theme])}, {rng.choice(CONDITIONS)})"
                for c in rng.sample(pool, n_caps)]
    return {
        "doc_id": f"10.5555/atlas.mini.{i:04d}",
        "title": sentences[0].rstrip("."),
        "abstract": " ".join(sentences),
        "journal": rng.choice(["J. Non-Cryst. Solids", "J. Am. Ceram. Soc.", "Ceram. Int.", "Opt. Mater."]),
        "authors": [rng.choice(["A. Rossi", "B. Chen", "C. Okafor", "D. Novak", "E. Sato", "F. García"])],
        "captions": [{"figure": n + 1, "text": c} for n, c in enumerate(captions)],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("-o", "--output", type=Path, default=Path(__file__).resolve().parent.parent / "data/minicorpus/corpus.jsonl")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    themes = list(THEMES)
    with args.output.open("w", encoding="utf-8") as out:
        for i in range(args.docs):
            doc = make_document(i, themes[i % len(themes)], rng)
            out.write(json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
