"""Procurement ontology terms, resolved against a configurable base IRI."""
from __future__ import annotations

from dataclasses import dataclass

from .rdf import IRI, RDF_TYPE, RDFS_LABEL

DEFAULT_BASE_IRI = "https://procurement.example.org/"

TYPE = IRI(RDF_TYPE)
LABEL = IRI(RDFS_LABEL)


@dataclass(frozen=True)
class Vocabulary:
    base: str
    Contract: IRI
    Institution: IRI
    Supplier: IRI
    hasInstitution: IRI
    hasSupplier: IRI
    hasAmount: IRI
    hasDate: IRI
    hasDescription: IRI
    type: IRI = TYPE
    label: IRI = LABEL

    @classmethod
    def for_base(cls, base: str = DEFAULT_BASE_IRI) -> "Vocabulary":
        names = ("Contract", "Institution", "Supplier", "hasInstitution",
                 "hasSupplier", "hasAmount", "hasDate", "hasDescription")
        return cls(base, **{n: IRI(base + n) for n in names})

    def properties(self) -> tuple[IRI, ...]:
        return (self.hasInstitution, self.hasSupplier, self.hasAmount,
                self.hasDate, self.hasDescription)
