import logging
from pathlib import Path
from typing import Dict, List, Union

from reportlab.lib.colors import HexColor, white
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from models.report import ExperimentReport, PrfScore

logger = logging.getLogger(__name__)

REPORT_TITLE = "Relatório de Experimento: CRF Semi-supervisionado"


class PDFReportGenerator:
    """Renderiza um ExperimentReport em PDF; modo invariante para bytes reprodutíveis"""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self.styles.add(ParagraphStyle(
            name='CustomTitle',
            fontSize=20,
            leading=24,
            alignment=TA_CENTER,
            textColor=HexColor('#333333'),
            fontName='Helvetica-Bold',
            spaceAfter=16
        ))
        self.styles.add(ParagraphStyle(
            name='CustomHeading1',
            fontSize=14,
            leading=18,
            textColor=HexColor('#0056b3'),
            spaceAfter=8,
            fontName='Helvetica-Bold',
            spaceBefore=12
        ))
        self.styles.add(ParagraphStyle(
            name='CustomCaption',
            fontSize=8,
            leading=10,
            textColor=HexColor('#999999'),
            alignment=TA_CENTER,
            spaceAfter=6,
            fontName='Helvetica'
        ))

    def _add_header_and_footer(self, canvas, doc):
        canvas.saveState()
        canvas.setFont('Helvetica-Bold', 10)
        canvas.setFillColor(HexColor('#0056b3'))
        canvas.drawString(inch, A4[1] - 0.75 * inch, REPORT_TITLE)

        canvas.setFont('Helvetica', 8)
        canvas.setFillColor(HexColor('#666666'))
        footer = f"Página {canvas.getPageNumber()}"
        canvas.drawString(A4[0] - inch - canvas.stringWidth(footer, 'Helvetica', 8), 0.75 * inch, footer)
        canvas.restoreState()

    def _table(self, header: List[str], rows: List[List[str]]) -> Table:
        table = Table([header] + rows, repeatRows=1)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), HexColor('#0056b3')),
            ('TEXTCOLOR', (0, 0), (-1, 0), white),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('ALIGN', (1, 0), (-1, -1), 'RIGHT'),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [white, HexColor('#f0f0f0')]),
            ('GRID', (0, 0), (-1, -1), 0.25, HexColor('#cccccc')),
        ]))
        return table

    @staticmethod
    def _prf(score: PrfScore) -> List[str]:
        return [f"{score.precision:.4f}", f"{score.recall:.4f}", f"{score.f1:.4f}"]

    def _last_run_per_method(self, report: ExperimentReport) -> Dict[str, Dict[str, PrfScore]]:
        last = {}
        for run in report.runs:
            last[run.method] = run.per_slot
        return last

    def generate_pdf_report(self, report: ExperimentReport, filename: Union[str, Path]) -> Path:
        filename = Path(filename)
        filename.parent.mkdir(parents=True, exist_ok=True)
        doc = SimpleDocTemplate(
            str(filename), pagesize=A4, topMargin=inch, bottomMargin=inch,
            title=REPORT_TITLE, invariant=1,
        )
        story = [
            Paragraph(REPORT_TITLE, self.styles["CustomTitle"]),
            Paragraph(
                f"Semente {report.seed} · {report.test_size} sentenças de teste · {len(report.runs)} execuções",
                self.styles["CustomCaption"],
            ),
            Spacer(1, 0.2 * inch),
            Paragraph("Resumo por método e fração", self.styles["CustomHeading1"]),
            self._table(
                ["Método", "Fração", "Execuções", "P", "R", "F1"],
                [
                    [row.method, f"{row.fraction:.4f}", str(row.runs),
                     f"{row.precision:.4f}", f"{row.recall:.4f}", f"{row.f1:.4f}"]
                    for row in report.summary()
                ],
            ),
            Paragraph("Execuções", self.styles["CustomHeading1"]),
            self._table(
                ["Método", "Fração", "Repetição", "P", "R", "F1"],
                [[r.method, f"{r.fraction:.4f}", str(r.repeat)] + self._prf(r.score) for r in report.runs],
            ),
        ]

        for method, per_slot in self._last_run_per_method(report).items():
            if not per_slot:
                continue
            story.append(Paragraph(f"Por slot: última execução de {method}", self.styles["CustomHeading1"]))
            story.append(self._table(
                ["Slot", "TP", "FP", "FN", "P", "R", "F1"],
                [[slot, str(s.tp), str(s.fp), str(s.fn)] + self._prf(s) for slot, s in per_slot.items()],
            ))

        doc.build(story, onFirstPage=self._add_header_and_footer, onLaterPages=self._add_header_and_footer)
        logger.info(f"💾 Relatório PDF '{filename}' gerado com sucesso.")
        return filename


def render_report_pdf(report: ExperimentReport, path: Union[str, Path]) -> Path:
    return PDFReportGenerator().generate_pdf_report(report, path)
