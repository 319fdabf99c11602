import java.util.Collections;
public void order(List<String> values) {
    Collections.sort(values);
}
