"""Class tables (ids, names, thing/stuff split and display colours)."""

from dataclasses import dataclass

IGNORE_LABEL = 255


@dataclass(frozen=True)
class ClassInfo:
    class_id: int
    name: str
    is_thing: bool
    color: tuple[int, int, int]


@dataclass(frozen=True)
class Taxonomy:
    name: str
    classes: tuple[ClassInfo, ...]

    def __post_init__(self) -> None:
        ids = [c.class_id for c in self.classes]
        if ids != list(range(len(ids))):
            raise ValueError(f"taxonomy {self.name}: class ids must be 0..{len(ids) - 1} in order")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def thing_ids(self) -> frozenset[int]:
        return frozenset(c.class_id for c in self.classes if c.is_thing)

    @property
    def stuff_ids(self) -> frozenset[int]:
        return frozenset(c.class_id for c in self.classes if not c.is_thing)

    def is_thing(self, class_id: int) -> bool:
        return self.info(class_id).is_thing

    def info(self, class_id: int) -> ClassInfo:
        if not 0 <= class_id < len(self.classes):
            raise ValueError(f"class id {class_id} is not in taxonomy {self.name}")
        return self.classes[class_id]

    def by_name(self, name: str) -> ClassInfo:
        for info in self.classes:
            if info.name == name:
                return info
        raise ValueError(f"class '{name}' is not in taxonomy {self.name}")


def _stuff(class_id, name, color):
    return ClassInfo(class_id, name, False, color)


def _thing(class_id, name, color):
    return ClassInfo(class_id, name, True, color)


_STUFF = (
    _stuff(0, "road", (128, 64, 128)),
    _stuff(1, "sidewalk", (244, 35, 232)),
    _stuff(2, "building", (70, 70, 70)),
    _stuff(3, "wall", (102, 102, 156)),
    _stuff(4, "fence", (190, 153, 153)),
    _stuff(5, "pole", (153, 153, 153)),
    _stuff(6, "traffic light", (250, 170, 30)),
    _stuff(7, "traffic sign", (220, 220, 0)),
    _stuff(8, "vegetation", (107, 142, 35)),
    _stuff(9, "terrain", (152, 251, 152)),
    _stuff(10, "sky", (70, 130, 180)),
)

# 11 stuff + 7 thing classes aligned between the pinhole source and panoramic target
OASS18 = Taxonomy(
    name="oass18",
    classes=_STUFF
    + (
        _thing(11, "pedestrians", (220, 20, 60)),
        _thing(12, "cyclists", (255, 0, 0)),
        _thing(13, "car", (0, 0, 142)),
        _thing(14, "truck", (0, 0, 70)),
        _thing(15, "other vehicles", (0, 60, 100)),
        _thing(16, "van", (0, 80, 100)),
        _thing(17, "two-wheeler", (0, 0, 230)),
    ),
)

CITYSCAPES19 = Taxonomy(
    name="cityscapes19",
    classes=_STUFF
    + (
        _thing(11, "person", (220, 20, 60)),
        _thing(12, "rider", (255, 0, 0)),
        _thing(13, "car", (0, 0, 142)),
        _thing(14, "truck", (0, 0, 70)),
        _thing(15, "bus", (0, 60, 100)),
        _thing(16, "train", (0, 80, 100)),
        _thing(17, "motorcycle", (0, 0, 230)),
        _thing(18, "bicycle", (119, 11, 32)),
    ),
)

TAXONOMIES = {t.name: t for t in (OASS18, CITYSCAPES19)}


def get_taxonomy(name: str) -> Taxonomy:
    try:
        return TAXONOMIES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown taxonomy '{name}', expected one of {sorted(TAXONOMIES)}") from None
