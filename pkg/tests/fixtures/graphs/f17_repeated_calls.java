public void twice(Printer printer, String line) {
    printer.print(line);
    printer.print(line);
    printer.flush();
}
