"""Shared commodity fixture: per-country reference top-5 lists.

Production quantities are synthetic (descending 1000..600 in list order with
consumption at half of production, so nothing is essential and production
order is preserved), plus filler commodities so each country table is deeper
than the top-10 cut. Comoros carries only four commodities by design.
"""

from cropcast.gridio import write_commodity_table

TOP5_BY_REGION = {
    "Western Africa": {
        "Benin": ["Cassava and products", "Yams", "Maize and products", "Beverages, Fermented", "Palm kernels"],
        "Burkina Faso": ["Beverages, Fermented", "Sorghum and products", "Maize and products", "Millet and products", "Pulses, Other and products"],
        "Cabo Verde": ["Sugar cane", "Pelagic Fish", "Tomatoes and products", "Vegetables, Other", "Milk - Excluding Butter"],
        "Cote d'Ivoire": ["Yams", "Cassava and products", "Rice and products", "Palm kernels", "Sugar cane"],
        "The Gambia": ["Groundnuts (Shelled Eq)", "Millet and products", "Milk - Excluding Butter", "Rice and products", "Beverages, Fermented"],
        "Ghana": ["Cassava and products", "Yams", "Plantains", "Palm kernels", "Maize and products"],
        "Guinea": ["Rice and products", "Cassava and products", "Palm kernels", "Maize and products", "Groundnuts (Shelled Eq)"],
        "Guinea-Bissau": ["Rice and products", "Nuts and products", "Roots, Other", "Palm kernels", "Plantains"],
        "Liberia": ["Cassava and products", "Rice and products", "Sugar cane", "Palm kernels", "Bananas"],
        "Mali": ["Maize and products", "Rice and products", "Millet and products", "Vegetables, Other", "Milk - Excluding Butter"],
        "Mauritania": ["Pelagic Fish", "Milk - Excluding Butter", "Rice and products", "Demersal Fish", "Sorghum and products"],
        "Niger": ["Millet and products", "Pulses, Other and products", "Sorghum and products", "Vegetables, Other", "Milk - Excluding Butter"],
        "Nigeria": ["Cassava and products", "Yams", "Vegetables, Other", "Maize and products", "Palm kernels"],
        "Senegal": ["Sugar cane", "Groundnuts (Shelled Eq)", "Rice and products", "Millet and products", "Vegetables, Other"],
        "Sierra Leone": ["Cassava and products", "Rice and products", "Vegetables, Other", "Palm kernels", "Milk - Excluding Butter"],
        "Togo": ["Cassava and products", "Maize and products", "Yams", "Sorghum and products", "Beans"],
    },
    "Northern Africa": {
        "Algeria": ["Vegetables, Other", "Potatoes and products", "Milk - Excluding Butter", "Wheat and products", "Onions"],
        "Egypt": ["Sugar cane", "Sugar beet", "Wheat and products", "Vegetables, Other", "Maize and products"],
        "Morocco": ["Wheat and products", "Sugar beet", "Vegetables, Other", "Milk - Excluding Butter", "Barley and products"],
        "Sudan": ["Sugar cane", "Sorghum and products", "Milk - Excluding Butter", "Groundnuts (Shelled Eq)", "Onions"],
        "Tunisia": ["Vegetables, Other", "Milk - Excluding Butter", "Tomatoes and products", "Wheat and products", "Olives (including preserved)"],
    },
    "Southern Africa": {
        "Botswana": ["Milk - Excluding Butter", "Beer", "Roots, Other", "Vegetables, Other", "Bovine Meat"],
        "Eswatini": ["Sugar cane", "Sugar (Raw Equivalent)", "Alcohol, Non-Food", "Maize and products", "Roots, Other"],
        "Lesotho": ["Milk - Excluding Butter", "Potatoes and products", "Maize and products", "Beer", "Vegetables, Other"],
        "Namibia": ["Roots, Other", "Pelagic Fish", "Beer", "Demersal Fish", "Milk - Excluding Butter"],
        "South Africa": ["Sugar cane", "Maize and products", "Milk - Excluding Butter", "Beer", "Potatoes and products"],
    },
    "Central Africa": {
        "Angola": ["Cassava and products", "Bananas", "Maize and products", "Sweet potatoes", "Beer"],
        "Cameroon": ["Cassava and products", "Plantains", "Maize and products", "Palm kernels", "Roots, Other"],
        "The Central African Republic": ["Cassava and products", "Yams", "Groundnuts (Shelled Eq)", "Roots, Other", "Sugar cane"],
        "Chad": ["Sorghum and products", "Groundnuts (Shelled Eq)", "Millet and products", "Milk - Excluding Butter", "Cereals, Other"],
        "Congo": ["Cassava and products", "Sugar cane", "Beer", "Vegetables, Other", "Palm kernels"],
        "Gabon": ["Plantains", "Cassava and products", "Sugar cane", "Yams", "Beer"],
        "Sao Tome and Principe": ["Plantains", "Coconuts - Incl Copra", "Palm kernels", "Roots, Other", "Pelagic Fish"],
    },
    "Eastern Africa": {
        "Djibouti": ["Vegetables, Other", "Milk - Excluding Butter", "Bovine Meat", "Mutton & Goat Meat", "Fruits, Other"],
        "Ethiopia": ["Maize and products", "Roots, Other", "Cereals, Other", "Sorghum and products", "Wheat and products"],
        "Kenya": ["Sugar cane", "Milk - Excluding Butter", "Maize and products", "Vegetables, Other", "Potatoes and products"],
        "Madagascar": ["Rice and products", "Sugar cane", "Cassava and products", "Sweet potatoes", "Fruits, Other"],
        "Malawi": ["Cassava and products", "Sweet potatoes", "Maize and products", "Sugar cane", "Fruits, Other"],
        "Mauritius": ["Sugar cane", "Sugar (Raw Equivalent)", "Vegetables, Other", "Poultry Meat", "Beer"],
        "Mozambique": ["Cassava and products", "Sugar cane", "Maize and products", "Milk - Excluding Butter", "Bananas"],
        "Comoros": ["Pelagic Fish", "Marine Fish, Other", "Demersal Fish", "Crustaceans"],
        "Rwanda": ["Bananas", "Sweet potatoes", "Cassava and products", "Potatoes and products", "Plantains"],
        "Seychelles": ["Pelagic Fish", "Demersal Fish", "Marine Fish, Other", "Fish, Body Oil", "Aquatic Animals, Others"],
        "Uganda": ["Sugar cane", "Plantains", "Cassava and products", "Maize and products", "Beverages, Fermented"],
        "United Republic of Tanzania": ["Maize and products", "Cassava and products", "Sweet potatoes", "Bananas", "Sugar cane"],
        "Zambia": ["Sugar cane", "Maize and products", "Cassava and products", "Sugar (Raw Equivalent)", "Milk - Excluding Butter"],
        "Zimbabwe": ["Sugar cane", "Maize and products", "Sugar (Raw Equivalent)", "Milk - Excluding Butter", "Cassava and products"],
    },
}

# Depth beyond the top five; never staples, never in any list above.
FILLERS = [("Eggs", 500.0), ("Honey", 450.0), ("Tea", 400.0), ("Coffee and products", 350.0), ("Sesame seed", 300.0)]

NO_FILLER_COUNTRIES = {"Comoros"}

EXPECTED_REGIONAL_COUNTS = {
    "Western Africa": {"Rice and products": 9, "Cassava and products": 8, "Maize and products": 7},
    "Eastern Africa": {"Maize and products": 8, "Cassava and products": 8, "Sugar cane": 9},
    "Southern Africa": {"Maize and products": 3},
    "Northern Africa": {"Wheat and products": 4},
}


def region_of() -> dict[str, str]:
    return {c: region for region, members in TOP5_BY_REGION.items() for c in members}


def balance_rows() -> list[tuple]:
    rows = []
    for region in sorted(TOP5_BY_REGION):
        for country in sorted(TOP5_BY_REGION[region]):
            listed = TOP5_BY_REGION[region][country]
            quantities = [(name, 1000.0 - 100.0 * i) for i, name in enumerate(listed)]
            if country not in NO_FILLER_COUNTRIES:
                quantities += FILLERS
            for name, prod in quantities:
                rows.append((country, name, 2018, prod, prod / 2.0))
    return rows


def write_fixture_tables(dirpath):
    balances = dirpath / "balances.csv"
    regions = dirpath / "regions.csv"
    write_commodity_table(balances, balance_rows())
    regions.write_text(
        "country,region\n"
        + "".join(f"{c},{r}\n" for c, r in sorted(region_of().items())),
        encoding="utf-8",
    )
    return balances, regions


# Regional totals for the crops tracked across two production years, with the
# published percent change each pair of totals must reproduce.
RATE_ROWS = [
    ("Western Africa", "Rice and products", 17803495.8, 15640125.8, -12.15),
    ("Western Africa", "Maize and products", 21666866.9, 20599545.5, -4.92),
    ("Western Africa", "Cassava and products", 90151658.8, 93948433.2, 4.21),
    ("Eastern Africa", "Maize and products", 28539928.7, 28095011.8, -1.55),
    ("Northern Africa", "Wheat and products", 18392407.2, 16610688.1, -9.68),
    ("Southern Africa", "Maize and products", 420814.5, 342688.341, -18.56),
    ("Central Africa", "Cassava and products", 47209110.0, 60598537.0, 28.36),
]

# Central-region cassava baseline: country contributions as percent of the
# regional total, the largest three pinned by the reference figures.
CASSAVA_TOTAL_T = 47209110.0
CASSAVA_SHARES = {
    "Democratic Republic of the Congo": 66.6,
    "Angola": 17.9,
    "Cameroon": 10.2,
    "Congo": 5.3,
}
