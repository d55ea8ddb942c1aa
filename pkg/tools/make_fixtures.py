"""Regenerate the bundled fixture assets under src/synthpass/data/.

Run once; the outputs are committed. Everything is drawn from fixed seeds.

    python tools/make_fixtures.py [--only faces,signatures,templates,scores]
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "synthpass" / "data"
FONTS = DATA / "fonts"
sys.path.insert(0, str(ROOT / "src"))


def save(path: Path, img: Image.Image) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG", compress_level=9, optimize=True)


# ---------------------------------------------------------------- faces

FACE_W, FACE_H = 480, 600
SKIN = [(224, 172, 140), (198, 140, 105), (241, 194, 160), (150, 100, 70), (232, 185, 150)]
HAIR = [(40, 28, 20), (110, 70, 35), (200, 170, 110), (20, 20, 20), (90, 90, 90)]
# passing recipes (scale, dx, blur sigma) and failing ones; each subject gets
# all four passing recipes plus two failure modes, shuffled
PASSING = [(1.00, 0, 0.0), (0.95, 10, 0.4), (1.05, -8, 0.8), (1.00, 4, 1.2)]
FAILING = {
    "small": (0.50, 0, 0.0),  # face bbox below 180 px, eyes too close together
    "edge": (1.05, -150, 0.0),  # left eye within 10% of the left border
    "blur": (1.00, 0, 4.0),  # sharpness under threshold
}
FAIL_PAIRS = [("small", "edge"), ("blur", "edge"), ("small", "blur"), ("edge", "blur"), ("blur", "small")]


def draw_face(rng: np.random.Generator, subject: int, scale: float, dx: float, blur: float):
    skin, hair = SKIN[subject % len(SKIN)], HAIR[subject % len(HAIR)]
    bg_top = np.array([170, 190, 205]) + rng.integers(-10, 10, 3)
    yy = np.linspace(0, 1, FACE_H)[:, None, None]
    bg = (bg_top[None, None, :] * (1 - 0.25 * yy)).repeat(FACE_W, axis=1)
    img = Image.fromarray(np.clip(bg, 0, 255).astype(np.uint8), "RGB")
    d = ImageDraw.Draw(img)

    cx, cy = FACE_W / 2 + dx, FACE_H * 0.50
    fw, fh = 200 * scale, 270 * scale
    # hair, shoulders, face
    d.ellipse([cx - fw * 0.62, cy - fh * 0.66, cx + fw * 0.62, cy + fh * 0.2], fill=hair)
    d.ellipse([cx - fw * 1.3, cy + fh * 0.55, cx + fw * 1.3, cy + fh * 1.6], fill=(60, 70, 90))
    d.rectangle([cx - fw * 0.18, cy + fh * 0.3, cx + fw * 0.18, cy + fh * 0.7], fill=skin)
    box = [cx - fw / 2, cy - fh / 2, cx + fw / 2, cy + fh / 2]
    d.ellipse(box, fill=skin)

    eye_dx = (44 + 4 * (subject % 3)) * scale
    eye_y = cy - fh * 0.08
    left, right = (cx - eye_dx, eye_y), (cx + eye_dx, eye_y)
    for ex, ey in (left, right):
        r = 14 * scale
        d.ellipse([ex - r * 1.6, ey - r, ex + r * 1.6, ey + r], fill=(250, 250, 250))
        d.ellipse([ex - r * 0.8, ey - r * 0.8, ex + r * 0.8, ey + r * 0.8], fill=(70, 50, 30))
        d.ellipse([ex - r * 0.4, ey - r * 0.4, ex + r * 0.4, ey + r * 0.4], fill=(5, 5, 5))
        d.line([ex - r * 1.8, ey - r * 1.9, ex + r * 1.8, ey - r * 2.1], fill=hair, width=max(int(5 * scale), 1))
    d.polygon([(cx, eye_y + 10 * scale), (cx - 14 * scale, cy + fh * 0.14), (cx + 14 * scale, cy + fh * 0.14)],
              fill=tuple(max(c - 30, 0) for c in skin))
    d.arc([cx - 42 * scale, cy + fh * 0.16, cx + 42 * scale, cy + fh * 0.3], 10, 170, fill=(150, 60, 60),
          width=max(int(5 * scale), 1))

    arr = np.asarray(img).astype(np.float64)
    arr += rng.normal(0, 2.0, arr.shape)  # sensor noise
    img = Image.fromarray(np.clip(np.rint(arr), 0, 255).astype(np.uint8), "RGB")
    if blur > 0:
        img = img.filter(ImageFilter.GaussianBlur(blur))
    bbox = [box[0], box[1], box[2] - box[0], box[3] - box[1]]
    return img, left, right, bbox


def make_faces(n_subjects: int = 5) -> None:
    from synthpass.face import Landmarks, SidecarLandmarkProvider, crop_icao, rank_and_select

    from synthpass.imageio import read_image, write_png

    root = DATA / "faces"
    cand_root = root / "candidates"
    rng = np.random.default_rng(20240917)
    recipes = {}
    for s in range(n_subjects):
        sdir = cand_root / f"s{s:02d}"
        pool = [("pass", r) for r in PASSING] + [(name, FAILING[name]) for name in FAIL_PAIRS[s % len(FAIL_PAIRS)]]
        order = rng.permutation(len(pool))
        recipes[f"s{s:02d}"] = []
        for j, ci in enumerate(order):
            kind, (scale, dx, blur) = pool[ci]
            img, left, right, bbox = draw_face(rng, s, scale, dx, blur)
            path = sdir / f"c{j:02d}.png"
            save(path, img)
            SidecarLandmarkProvider.write(
                path, Landmarks(tuple(map(float, left)), tuple(map(float, right)), tuple(map(float, bbox)), "fixture")
            )
            recipes[f"s{s:02d}"].append({"file": path.name, "kind": kind, "scale": scale, "dx": dx, "blur": blur})

    # portrait pool: ICAO crops of the retained images
    prov = SidecarLandmarkProvider()
    pool = root / "portraits"
    pool.mkdir(parents=True, exist_ok=True)
    for sdir in sorted(cand_root.iterdir()):
        files = sorted(sdir.glob("c*.png"))
        cands = [(read_image(f, "RGB"), prov(f)) for f in files]
        sel = rank_and_select(cands, k=3)
        for rank, idx in enumerate(sel.indices):
            crop = crop_icao(cands[idx][0], cands[idx][1], out_size=(330, 420))
            write_png(pool / f"{sdir.name}_r{rank}.png", crop)
    (root / "candidate_recipes.json").write_text(
        json.dumps(recipes, indent=1) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------- signatures


def make_signatures(n: int = 6) -> None:
    from skimage.filters import threshold_otsu

    root = DATA / "signatures"
    rng = np.random.default_rng(77)
    counts = {}
    for i in range(n):
        w, h = 600, 200
        paper = np.full((h, w, 3), (246, 243, 236), np.float64) + rng.normal(0, 3.0, (h, w, 3))
        img = Image.fromarray(np.clip(paper, 0, 255).astype(np.uint8), "RGB")
        d = ImageDraw.Draw(img)
        ink = (20, 30, 90) if i % 2 else (15, 15, 20)
        t = np.linspace(0, 1, 400)
        freq = rng.uniform(6, 14)
        x = 40 + 520 * t
        y = 100 + 45 * np.sin(2 * np.pi * freq * t + rng.uniform(0, 6)) * np.exp(-1.2 * t) + 15 * np.sin(
            2 * np.pi * 2 * t
        )
        d.line(list(zip(x, y)), fill=ink, width=4, joint="curve")
        # underline flourish
        d.line([(60 + rng.uniform(0, 40), 160), (520 - rng.uniform(0, 60), 150)], fill=ink, width=3)
        img = img.filter(ImageFilter.GaussianBlur(0.7))
        path = root / f"sig_{i:02d}.png"
        save(path, img)
        gray = np.asarray(img.convert("RGB")).astype(np.float64) @ np.array([0.299, 0.587, 0.114])
        gray = np.clip(np.rint(gray), 0, 255)
        counts[path.name] = int((gray <= threshold_otsu(gray)).sum())
    (root / "reference_counts.json").write_text(json.dumps(counts, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- templates

CANVAS = (1476, 1040, 300)  # 125 x 88 mm at 300 dpi
SANS, BOLD, MONO = "../fonts/DejaVuSans.ttf", "../fonts/DejaVuSans-Bold.ttf", "../fonts/DejaVuSansMono.ttf"

# field id -> (bounds, label); shared geometry for all three countries
FIELDS = {
    "surname": ([440, 120, 640, 50], ("Nazwisko", "Apellidos", "Apelido")),
    "given_name": ([440, 210, 640, 50], ("Imiona", "Nombre", "Nome")),
    "sex": ([440, 300, 140, 50], ("Płeć", "Sexo", "Sexo")),
    "birth_date": ([440, 390, 300, 50], ("Data urodzenia", "Fecha de nacimiento", "Data de nascimento")),
    "birth_place": ([780, 390, 440, 50], ("Miejsce urodzenia", "Lugar de nacimiento", "Local de nascimento")),
    "issue_date": ([440, 480, 300, 50], ("Data wydania", "Fecha de expedición", "Data de emissão")),
    "expiry_date": ([780, 480, 300, 50], ("Data ważności", "Fecha de caducidad", "Data de validade")),
    "document_number": ([1090, 90, 350, 50], ("Nr paszportu", "Pasaporte nº", "Passaporte nº")),
}
AUTHORITY_BOUNDS = [440, 570, 760, 50]
NATIONALITY_BOUNDS = [620, 300, 420, 50]
MRZ_BOUNDS = [40, 830, 1396, 170]
PORTRAIT_BOUNDS = [60, 150, 330, 420]
SIGNATURE_BOUNDS = [60, 610, 330, 120]

COUNTRIES = {
    "pol": {
        "code": "POL",
        "idx": 0,
        "header": "RZECZPOSPOLITA POLSKA / REPUBLIC OF POLAND",
        "nationality": "POLSKIE / POLISH",
        "nat_label": "Obywatelstwo",
        "authority": ("Organ wydający", "MINISTER SPRAW WEWNĘTRZNYCH"),
        "ink": (30, 30, 60),
        "tint": [(214, 120, 150), (150, 170, 215)],
        "pattern": "[A-Z]{2}[0-9]{7}",
        "validity": 10,
        "date_format": "%d.%m.%Y",
        "sex_labels": {"M": "M/M", "F": "K/F"},
        "personal": "pesel",
        "blur": 1.5,
    },
    "esp": {
        "code": "ESP",
        "idx": 1,
        "header": "REINO DE ESPAÑA / KINGDOM OF SPAIN",
        "nationality": "ESPAÑOLA",
        "nat_label": "Nacionalidad",
        "authority": ("Autoridad", None),
        "ink": (40, 20, 20),
        "tint": [(225, 170, 110), (200, 120, 120)],
        "pattern": "[A-Z]{3}[0-9]{6}",
        "validity": 10,
        "date_format": "%d %m %Y",
        "sex_labels": {"M": "M", "F": "F"},
        "personal": None,
        "blur": 1.0,
    },
    "prt": {
        "code": "PRT",
        "idx": 2,
        "header": "REPÚBLICA PORTUGUESA / PORTUGUESE REPUBLIC",
        "nationality": "PORTUGUESA",
        "nat_label": "Nacionalidade",
        "authority": ("Autoridade", "SEF"),
        "ink": (20, 40, 30),
        "tint": [(120, 190, 150), (200, 150, 180)],
        "pattern": "[A-Z][0-9]{6}",
        "validity": 5,
        "date_format": "%d %m %Y",
        "sex_labels": {"M": "M", "F": "F"},
        "personal": None,
        "blur": 1.2,
    },
}

DICTS = {
    "pol": {
        "given_male": "Jan Piotr Krzysztof Andrzej Tomasz Paweł Michał Marcin Łukasz Jakub Grzegorz Adam "
        "Mateusz Wojciech Kamil Rafał Szymon Bartosz Dariusz Zbigniew Jerzy Mariusz Witold Józef",
        "given_female": "Anna Maria Katarzyna Małgorzata Agnieszka Barbara Ewa Krystyna Elżbieta Zofia "
        "Magdalena Joanna Monika Aleksandra Natalia Beata Danuta Jadwiga Dorota Halina Irena Iwona Alicja Łucja",
        "surname": "Nowak Kowalski|Kowalska Wiśniewski|Wiśniewska Wójcik Kowalczyk Kamiński|Kamińska "
        "Lewandowski|Lewandowska Zieliński|Zielińska Szymański|Szymańska Woźniak Dąbrowski|Dąbrowska "
        "Kozłowski|Kozłowska Jankowski|Jankowska Mazur Kwiatkowski|Kwiatkowska Krawczyk Piotrowski|Piotrowska "
        "Grabowski|Grabowska Nowakowski|Nowakowska Pawłowski|Pawłowska Michalski|Michalska Król Wieczorek "
        "Jabłoński|Jabłońska Wróbel Majewski|Majewska Olszewski|Olszewska Stępień Jaworski|Jaworska Malinowski|Malinowska",
        "city": "Warszawa;Kraków;Łódź;Wrocław;Poznań;Gdańsk;Szczecin;Bydgoszcz;Lublin;Białystok;Katowice;"
        "Gdynia;Częstochowa;Radom;Toruń;Kielce;Rzeszów;Gliwice;Zabrze;Olsztyn;Opole;Elbląg;Płock;Tarnów",
        "authority": "Wojewoda Mazowiecki;Wojewoda Małopolski;Wojewoda Śląski;Wojewoda Pomorski;"
        "Wojewoda Łódzki;Wojewoda Dolnośląski",
    },
    "esp": {
        "given_male": "José Antonio Manuel Francisco David Juan Javier Daniel Carlos Jesús Alejandro Miguel "
        "Rafael Pablo Pedro Ángel Sergio Fernando Jorge Luis Alberto Álvaro Adrián Raúl",
        "given_female": "María Carmen Ana Isabel Laura Cristina Marta Lucía Pilar Dolores Paula Elena "
        "Sara Raquel Rosa Manuela Mercedes Teresa Beatriz Nuria Silvia Julia Irene Patricia",
        "surname": "García González Rodríguez Fernández López Martínez Sánchez Pérez Gómez Martín "
        "Jiménez Ruiz Hernández Díaz Moreno Muñoz Álvarez Romero Alonso Gutiérrez Navarro Torres "
        "Domínguez Vázquez Ramos Gil Ramírez Serrano Blanco Molina Morales Suárez Ortega Delgado "
        "Castro Ortiz Rubio Marín Sanz Núñez Iglesias Medina Garrido Cortés Castillo Santos Lozano "
        "Guerrero Cano Prieto Méndez Cruz Calvo Gallego Vidal León Márquez Herrera Peña Flores",
        "city": "Madrid;Barcelona;Valencia;Sevilla;Zaragoza;Málaga;Murcia;Palma;Bilbao;Alicante;Córdoba;"
        "Valladolid;Vigo;Gijón;Granada;A Coruña;Vitoria;Elche;Oviedo;Badajoz;Cartagena;Jerez;Almería;León",
        "authority": "Dirección General de Policía;DGP Madrid;DGP Barcelona;DGP Sevilla;DGP Valencia",
    },
    "prt": {
        "given_male": "João José António Manuel Francisco Luís Pedro Carlos Paulo Rui Miguel Jorge Tiago "
        "Ricardo Nuno Bruno André Diogo Gonçalo Rodrigo Duarte Tomás Vasco Fernando",
        "given_female": "Maria Ana Joana Inês Beatriz Mariana Sofia Catarina Rita Sara Leonor Marta "
        "Carolina Margarida Teresa Helena Isabel Fernanda Patrícia Cláudia Susana Filipa Rosa Lúcia",
        "surname": "Silva Santos Ferreira Pereira Oliveira Costa Rodrigues Martins Jesus Sousa Fernandes "
        "Gonçalves Gomes Lopes Marques Alves Almeida Ribeiro Pinto Carvalho Teixeira Moreira Correia "
        "Mendes Nunes Soares Vieira Monteiro Cardoso Rocha Raposo Neves Coelho Cruz Cunha Pires "
        "Ramos Reis Simões Antunes Matos Fonseca Machado Araújo Barbosa Tavares Lourenço Castro",
        "city": "Lisboa;Porto;Braga;Coimbra;Funchal;Setúbal;Aveiro;Faro;Viseu;Leiria;Évora;Guimarães;"
        "Amadora;Almada;Sintra;Cascais;Loures;Odivelas;Barreiro;Matosinhos;Bragança;Beja;Guarda;Tomar",
        "authority": "SEF;IRN Lisboa;IRN Porto;Governo Civil de Braga;Governo Civil de Faro",
    },
}


def guilloche(w: int, h: int, tint, seed: int) -> Image.Image:
    """Interleaved sine rosettes on a transparent sheet."""
    rng = np.random.default_rng(seed)
    img = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    d = ImageDraw.Draw(img)
    x = np.linspace(0, w, 900)
    for k in range(28):
        col = tint[k % len(tint)] + (95,)
        amp = 30 + 18 * math.sin(k)
        phase = rng.uniform(0, 2 * math.pi)
        y0 = 20 + k * (h - 40) / 27
        y = y0 + amp * np.sin(2 * np.pi * x / (140 + 6 * k) + phase) * np.cos(2 * np.pi * x / 610)
        d.line(list(zip(x, y)), fill=col, width=2)
    cx, cy = w * 0.62, h * 0.42
    t = np.linspace(0, 2 * np.pi, 1500)
    for k in range(10):
        r = 120 + 10 * k + 40 * np.sin(9 * t + k * 0.4)
        d.line(list(zip(cx + r * np.cos(t), cy + r * np.sin(t))), fill=tint[1] + (80,), width=2)
    return img


def emblem(size, color, idx: int) -> Image.Image:
    w, h = size
    img = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    d = ImageDraw.Draw(img)
    shield = [(0.1 * w, 0.15 * h), (0.9 * w, 0.15 * h), (0.9 * w, 0.6 * h), (0.5 * w, 0.95 * h), (0.1 * w, 0.6 * h)]
    d.polygon(shield, fill=color + (255,))
    inner = [(0.5 * w + (x - 0.5 * w) * 0.8, 0.55 * h + (y - 0.55 * h) * 0.8) for x, y in shield]
    d.polygon(inner, fill=(255, 255, 255, 255))
    # crown
    d.polygon([(0.25 * w, 0.12 * h), (0.3 * w, 0.02 * h), (0.4 * w, 0.09 * h), (0.5 * w, 0.0), (0.6 * w, 0.09 * h),
               (0.7 * w, 0.02 * h), (0.75 * w, 0.12 * h)], fill=color + (255,))
    # a different charge per country
    cx, cy = 0.5 * w, 0.5 * h
    if idx == 0:
        d.polygon([(cx, cy - 60), (cx + 70, cy), (cx + 20, cy + 10), (cx, cy + 90), (cx - 20, cy + 10), (cx - 70, cy)],
                  fill=color + (255,))
    elif idx == 1:
        d.rectangle([cx - 60, cy - 50, cx + 60, cy + 70], outline=color + (255,), width=12)
        d.line([cx - 60, cy + 10, cx + 60, cy + 10], fill=color + (255,), width=10)
    else:
        for dx, dy in ((0, -45), (-45, 10), (45, 10), (0, 10), (0, 65)):
            d.ellipse([cx + dx - 18, cy + dy - 18, cx + dx + 18, cy + dy + 18], fill=color + (255,))
    return img


def portrait_mask(w: int, h: int) -> Image.Image:
    """Opaque inside, linear ramp over the outer 12 px."""
    yy, xx = np.mgrid[0:h, 0:w]
    dist = np.minimum.reduce([xx + 0.5, w - xx - 0.5, yy + 0.5, h - yy - 0.5])
    return Image.fromarray(np.clip(dist / 12.0 * 255, 0, 255).astype(np.uint8), "L")


def _font(path: str, pt: float) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(str((DATA / "pol" / path).resolve()), size=round(pt * CANVAS[2] / 72))


def labels_sheet(spec: dict) -> Image.Image:
    """All static description text of one country on one transparent sheet."""
    w, h = CANVAS[:2]
    i = spec["idx"]
    img = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    d = ImageDraw.Draw(img)
    small, big = _font(SANS, 6), _font(BOLD, 8.5)
    ink = spec["ink"] + (255,)
    d.text((40, 36), spec["header"], font=big, fill=ink)
    for _, (b, labels) in FIELDS.items():
        d.text((b[0], b[1] - 4), labels[i], font=small, fill=ink, anchor="lb")
    d.text((NATIONALITY_BOUNDS[0], NATIONALITY_BOUNDS[1] - 4), spec["nat_label"], font=small, fill=ink, anchor="lb")
    d.text((NATIONALITY_BOUNDS[0], NATIONALITY_BOUNDS[1] + 38), spec["nationality"], font=_font(SANS, 9), fill=ink,
           anchor="ls")
    label, value = spec["authority"]
    d.text((AUTHORITY_BOUNDS[0], AUTHORITY_BOUNDS[1] - 4), label, font=small, fill=ink, anchor="lb")
    d.text((AUTHORITY_BOUNDS[0], AUTHORITY_BOUNDS[1] + 38), value, font=_font(SANS, 9), fill=ink, anchor="ls")
    return img


def field_layer(fid: str, bounds, z: int, spec: dict, **style) -> dict:
    st = {"font_family": SANS, "font_size": 9, "color": list(spec["ink"]) + [255], "uppercase": True}
    st.update(style)
    return {"id": fid, "class": "SubjectTextField", "z_order": z, "bounds": bounds, "style": st}


def country_config(key: str) -> dict:
    spec = COUNTRIES[key]
    w, h, dpi = CANVAS
    layers = [
        {"id": "guilloche", "class": "LogoPattern", "z_order": 0, "bounds": [0, 0, w, h],
         "asset": "layers/guilloche.png", "edge_blur": False},
        {"id": "emblem", "class": "LogoPattern", "z_order": 1, "bounds": [1130, 170, 300, 340],
         "asset": "layers/emblem.png", "opacity": 0.35},
    ]
    z = 2
    bindings = {}
    if key == "esp":
        # text-based static layers instead of a pre-rendered label sheet
        static = [("header", [40, 20, 1000, 60], spec["header"], BOLD, 10)]
        for fid, (b, labels) in FIELDS.items():
            static.append((f"label_{fid}", [b[0], b[1] - 30, min(400, w - b[0]), 30], labels[spec["idx"]], SANS, 6))
        static.append(("label_nationality", [NATIONALITY_BOUNDS[0], NATIONALITY_BOUNDS[1] - 30, 300, 30],
                       spec["nat_label"], SANS, 6))
        static.append(("nationality", NATIONALITY_BOUNDS, spec["nationality"], SANS, 9))
        static.append(("label_authority", [AUTHORITY_BOUNDS[0], AUTHORITY_BOUNDS[1] - 30, 300, 30],
                       spec["authority"][0], SANS, 6))
        for sid, b, text, font, pt in static:
            layers.append({"id": sid, "class": "StaticDescriptionText", "z_order": z, "bounds": b, "text": text,
                           "style": {"font_family": font, "font_size": pt, "color": list(spec["ink"]) + [255]}})
            z += 1
    else:
        layers.append({"id": "labels", "class": "StaticDescriptionText", "z_order": z, "bounds": [0, 0, w, h],
                       "asset": "layers/labels.png", "edge_blur": False})
        z += 1
    layers.append({"id": "portrait", "class": "BiometricArea", "z_order": 30, "bounds": PORTRAIT_BOUNDS,
                   "biometric": "face", "mask": "layers/portrait_mask.png", "opacity": 0.97})
    layers.append({"id": "signature", "class": "BiometricArea", "z_order": 31, "bounds": SIGNATURE_BOUNDS,
                   "biometric": "signature", "fit": "contain"})
    z = 40
    for fid, (b, _) in FIELDS.items():
        extra = {}
        if fid == "document_number":
            n = len(parse_pattern_length(spec["pattern"]))
            extra = {"font_family": BOLD, "kerning_offsets": [0.0] + [1.5 if i % 3 == 0 else 0.5 for i in range(1, n)],
                     "baseline_curvature": 0.0002, "color": [170, 20, 30, 255]}
        layers.append(field_layer(fid, b, z, spec, **extra))
        bindings[fid] = fid
        z += 1
    if key == "esp":
        layers.append(field_layer("authority", AUTHORITY_BOUNDS, z, spec))
        bindings["issuing_authority"] = "authority"
        z += 1
    layers.append(field_layer("mrz", MRZ_BOUNDS, 60, spec, font_family=MONO, font_size=11.5, line_spacing=1.4,
                              color=[0, 0, 0, 255], uppercase=False))
    bindings["mrz"] = "mrz"
    return {
        "schema_version": 1,
        "country_code": spec["code"],
        "canvas": {"width": w, "height": h, "dpi": dpi, "color": [250, 248, 240]},
        "validity_years": spec["validity"],
        "document_number_pattern": spec["pattern"],
        "personal_number_scheme": spec["personal"],
        "date_format": spec["date_format"],
        "sex_labels": spec["sex_labels"],
        "reference_date": "2025-01-01",
        "edge_blur_sigma": spec["blur"],
        "dictionaries": {c: f"dicts/{c}.txt" for c in ("given_male", "given_female", "surname", "city", "authority")},
        "asset_pools": {"faces": "../faces/portraits", "signatures": "../signatures"},
        "mrz_layer_id": "mrz",
        "field_bindings": bindings,
        "layers": layers,
    }


def parse_pattern_length(pattern: str) -> list[str]:
    from synthpass.subjects import parse_number_pattern

    return parse_number_pattern(pattern)


def dump_config(cfg: dict) -> str:
    """JSON with one line per layer, so line numbers in diagnostics are useful."""
    head = {k: v for k, v in cfg.items() if k != "layers"}
    text = json.dumps(head, indent=2, ensure_ascii=False)[:-2]
    rows = ",\n".join("    " + json.dumps(layer, ensure_ascii=False) for layer in cfg["layers"])
    return text + ',\n  "layers": [\n' + rows + "\n  ]\n}\n"


def make_templates() -> None:
    for key, spec in COUNTRIES.items():
        root = DATA / key
        (root / "layers").mkdir(parents=True, exist_ok=True)
        (root / "dicts").mkdir(parents=True, exist_ok=True)
        w, h, _ = CANVAS
        save(root / "layers" / "guilloche.png", guilloche(w, h, spec["tint"], 100 + spec["idx"]))
        save(root / "layers" / "emblem.png", emblem((300, 340), spec["tint"][0], spec["idx"]))
        save(root / "layers" / "portrait_mask.png", portrait_mask(PORTRAIT_BOUNDS[2], PORTRAIT_BOUNDS[3]))
        if key != "esp":
            save(root / "layers" / "labels.png", labels_sheet(spec))
        for cat, raw in DICTS[key].items():
            sep = ";" if cat in ("city", "authority") else " "
            entries = [e.strip() for e in raw.split(sep) if e.strip()]
            (root / "dicts" / f"{cat}.txt").write_text(
                f"# {spec['code']} {cat}\n" + "\n".join(entries) + "\n", encoding="utf-8"
            )
        (root / "config.json").write_text(dump_config(country_config(key)), encoding="utf-8")


# ---------------------------------------------------------------- scores


def make_scores() -> None:
    """Synthetic detector scores with deliberate ties, plus oracle-computed goldens."""
    sys.path.insert(0, str(ROOT / "tests"))
    import oracles

    rng = np.random.default_rng(3010)
    root = DATA / "scores"
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    groups = [("bonafide", "none", 240, 2.0, 5.0), ("attack", "print", 160, 5.0, 2.5), ("attack", "screen", 120, 4.0, 2.0)]
    for label, pai, n, a, b in groups:
        for i, v in enumerate(rng.beta(a, b, n)):
            rows.append((f"{pai}/{i:04d}.png", label, pai, round(float(v), 2)))
    order = rng.permutation(len(rows))
    rows = [rows[i] for i in order]
    lines = ["# polarity=higher", "path,label,pai,score"] + [f"{p},{lab},{pai},{s:.2f}" for p, lab, pai, s in rows]
    (root / "fixture_scores.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    entries = [(s, lab == "attack", pai) for _, lab, pai, s in rows]
    golden = {mode: oracles.full_report(entries, mode) for mode in ("worst", "all", "print", "screen")}
    (root / "fixture_metrics.json").write_text(json.dumps(golden, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", default="faces,signatures,templates,scores")
    args = ap.parse_args()
    parts = set(args.only.split(","))
    if "signatures" in parts:
        make_signatures()
    if "faces" in parts:
        make_faces()
    if "templates" in parts:
        make_templates()
    if "scores" in parts:
        make_scores()
